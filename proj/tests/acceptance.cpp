// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero when any criterion fails.

#include "qce/analysis.hpp"
#include "qce/elevator.hpp"
#include "qce/errors.hpp"
#include "qce/genmap.hpp"
#include "qce/ifs.hpp"
#include "qce/params.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace qce;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Criterion {
 public:
  void require(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    lines_.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
  void info(const std::string& what) { lines_.push_back("      " + what); }
  bool ok() const { return ok_; }
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  bool ok_ = true;
  std::vector<std::string> lines_;
};

std::string f(double v, int digits = 12) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

bool near_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

// W1 with its declared theorem targets alpha = 1, beta = 0.4.
ConstructionInstance w1_instance() {
  auto P = check_direct_params(2, 2.1, 0.1, 3, 4, 0.27);
  P.alpha = 1.0;
  P.beta = 0.4;
  return build_instance_systems(P);
}

struct W1 {
  ConstructionInstance inst = w1_instance();
  GeneratingMap gm;
  double build_seconds = 0.0;
};

void c1(W1& w, Criterion& c) {
  const auto t0 = Clock::now();
  w.gm = plan_moves(w.inst);
  const auto rep = validate_generating_map(w.gm);
  w.build_seconds = seconds_since(t0);
  c.require(w.gm.script.size() > 0, "generating map built: " + std::to_string(w.gm.script.size()) + " moves, " +
                                       std::to_string(w.gm.hole_count()) + " holes");
  for (const auto& chk : rep.checks) c.require(chk.passed, chk.name + (chk.detail.empty() ? "" : ": " + chk.detail));
  c.require(w.build_seconds <= 60.0, "build + validation in " + f(w.build_seconds, 3) + " s (limit 60 s)");
}

void c2(W1& w, Criterion& c) {
  const double dim_e = moran_dimension_base(w.inst).value;
  const double dim_f = cylinder_dimension_fiber(w.inst).value;
  const double exact_e = std::log(3.0) / std::log(10.0);
  const double exact_f = std::log(4.0) / std::log(1.0 / 0.27);
  c.require(std::abs(dim_e - exact_e) <= 1e-12, "dim E = " + f(dim_e) + " vs ln3/ln10 = " + f(exact_e));
  c.require(std::abs(dim_f - exact_f) <= 1e-12, "fiber-image dim = " + f(dim_f) + " vs ln4/ln(1/0.27) = " + f(exact_f));
  c.require(dim_e > *w.inst.params.beta, "dim E > beta = 0.4");
  c.require(dim_f > *w.inst.params.alpha, "fiber-image dim > alpha = 1");
}

void c3(W1& w, Criterion& c) {
  const auto cloud = fiber_image_cloud(w.inst, FiberSpec::parse("1|1"), 8);
  std::vector<double> scales;
  for (int k = 1; k <= 7; ++k) scales.push_back(std::pow(0.27, k));
  const auto e = box_counting_dimension(cloud, scales);
  c.require(std::abs(e.value - 1.0588) <= 0.05, "depth-8 cloud (" + std::to_string(cloud.size()) +
                                                    " points) at t^1..t^7: " + f(e.value, 6) + " +- " +
                                                    f(e.slope_stderr, 3) + " (target 1.0588 +- 0.05)");
  const double exact = std::log(4.0) / std::log(1.0 / 0.27);
  const double fit = fit_loglog(cylinder_dimension_fiber(w.inst).per_scale).value;
  c.require(std::abs(fit - exact) <= 1e-12, "exact cylinder profile fit " + f(fit) + " vs " + f(exact));
}

void c4(Criterion& c) {
  const auto t0 = Clock::now();
  const auto P = derive_paper_params({2, 3.0, 1.2, 0.4});
  const auto audit = audit_paper_params(P);
  const double secs = seconds_since(t0);
  // independently recomputed closed forms (50-digit arithmetic)
  const double ledger[7] = {0.176776695297, 0.0577037501269, 0.629960524947, 0.217637640824,
                            0.564724718352, 9.33352287297e-5, 3.03558484351e-16};
  for (int i = 0; i < 7; ++i) {
    c.require(near_rel(P.bounds[static_cast<std::size_t>(i)], ledger[i], 1e-3),
              "bound " + std::to_string(i + 1) + " = " + f(P.bounds[static_cast<std::size_t>(i)]) + " vs " +
                  f(ledger[i]));
  }
  c.info("d = " + f(P.d, 17) + ", M = " + std::to_string(P.M) + ", t = " + f(P.t, 17) +
         ", M' = " + std::to_string(P.Mprime));
  for (const auto& chk : audit.checks) c.require(chk.passed, chk.name + (chk.detail.empty() ? "" : ": " + chk.detail));
  c.require(P.q < 1.0 && near_rel(P.q, 0.136, 0.01), "q = " + f(P.q) + " (about 0.136)");
  c.require(secs <= 1.0, "derivation + audit in " + f(secs * 1e3, 3) + " ms (limit 1 s)");
}

void c5(W1& w, Criterion& c) {
  PhiEvaluator ev(w.gm);
  const double tol = 1e-10 * w.inst.target_box().diameter();
  constexpr std::size_t kPerHole = 1000;
  double worst = 0.0;
  std::size_t failures = 0;
  for (std::size_t k = 0; k < w.gm.hole_count(); ++k) {
    for (std::size_t i = 0; i < kPerHole; ++i) {
      const Vec y = sample_box_boundary(w.gm.Q, 0xC0DE + k, i);
      const Vec lhs = ev.eval(w.gm.hole_maps[k].apply(y)).point;
      const Vec rhs = w.gm.target_maps[k].apply(ev.eval(y).point);
      const double dev = (lhs - rhs).norm();
      worst = std::max(worst, dev);
      if (!(dev <= tol)) ++failures;
    }
  }
  c.require(failures == 0, "phi(h_k(y)) = g_k(phi(y)) on " + std::to_string(kPerHole) + " boundary samples x " +
                               std::to_string(w.gm.hole_count()) + " holes: max deviation " + f(worst, 3) +
                               " (tolerance " + f(tol, 3) + ")");
  const auto a = audit_cylinder_conjugacy(w.inst, w.gm, 6, 300, 0x5EED);
  c.require(a.failures == 0, "cylinders of depth 0..6: " + std::to_string(a.failures) + " failures of " +
                                 std::to_string(a.samples) + (a.first_failure.empty() ? "" : "; " + a.first_failure));
}

void c6(W1& w, Criterion& c) {
  QcSampleOptions o;
  o.points = 1000;
  const auto st = qc_ratio_sample(w.inst, w.gm, o);
  c.require(st.min_det > 0.0, "min sampled jacobian determinant " + f(st.min_det, 6));
  c.require(std::isfinite(st.max_ratio) && st.max_ratio <= 1.1 * st.max_oracle,
            "maxRatio " + f(st.max_ratio, 6) + " <= 1.1 x oracle " + f(st.max_oracle, 6));
  const auto b = analytic_qc_bound(w.inst);
  c.require(b.kappa == 3, "kappa = " + std::to_string(b.kappa));
  c.require(near_rel(b.bound, 1.574e5, 0.01), "analytic bound " + f(b.bound, 7) + " (about 1.574e5)");
}

void c7(W1& w, Criterion& c) {
  const auto base = sobolev_energy(w.inst, nullptr, 0);
  // 50-digit value of 12 * 2.7^2.1 * 0.01
  constexpr double kQ = 0.9661513182571;
  c.require(std::abs(base.q - kQ) <= 1e-9, "q = " + f(base.q, 13) + " vs recomputed " + f(kQ, 13));

  // the rate must hold at every fixed seed, not at a lucky one
  constexpr std::size_t kN = 20000;
  constexpr int kSeeds = 8;
  int in_band = 0;
  double sum1 = 0.0, sum2 = 0.0;
  std::string ratios;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 0x5EED + static_cast<std::uint64_t>(s);
    const auto a = sobolev_energy(w.inst, &w.gm, kN, seed);
    const auto b = sobolev_energy(w.inst, &w.gm, 2 * kN, seed);
    const double r = b.halfwidth / a.halfwidth;
    in_band += (r >= 0.6 && r <= 0.85) ? 1 : 0;
    sum1 += a.halfwidth * a.halfwidth;
    sum2 += b.halfwidth * b.halfwidth;
    ratios += (s ? ", " : "") + f(r, 3);
  }
  c.require(in_band == kSeeds, "halfwidth ratio " + std::to_string(kN) + " -> " + std::to_string(2 * kN) +
                                   " in [0.6, 0.85] at " + std::to_string(in_band) + " of " +
                                   std::to_string(kSeeds) + " seeds: " + ratios);
  c.info("pooled ratio " + f(std::sqrt(sum2 / sum1), 4) + " (1/sqrt 2 = 0.7071); the W1 shell integrand is heavy-tailed");

  auto perturbed = w.inst;
  perturbed.params.p = 2.2;
  try {
    sobolev_energy(perturbed, nullptr, 0);
    c.require(false, "p = 2.2 did not raise DivergentSeries");
  } catch (const DivergentSeries& e) {
    c.require(e.q() >= 1.0, std::string("p = 2.2 raises DivergentSeries: ") + e.what());
  }
}

void c8(W1& w, Criterion& c) {
  {
    auto m = w.gm.script[5];
    auto target = m.cells[7].target;
    std::swap(target[0], target[1]);
    m.cells[7] = AffinePiece(m.cells[7].domain, target);
    try {
      validate_move(m, 5);
      c.require(false, "inverted simplex went undetected");
    } catch (const MoveValidationFailure& e) {
      c.require(e.move() == 5 && e.simplex() == 7, std::string("inverted simplex: ") + e.what());
    }
  }
  {
    const Box dom(v2(0, 0), v2(1, 1));
    const auto id = SignedPermutation::identity(2);
    ExplicitSystem sys{dom, {{0.3, id, v2(0.1, 0.1)}, {0.3, id, v2(0.6, 0.1)}, {0.3, id, v2(0.5, 0.2)}}};
    try {
      verify_strong_separation(sys);
      c.require(false, "overlapping packing went undetected");
    } catch (const SeparationViolation& e) {
      const auto [i, j] = e.witness();
      c.require(e.kind() == SeparationViolation::Kind::overlap && i == 1 && j == 2,
                "overlapping packing: witness (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
    }
  }
  {
    try {
      check_direct_params(2, 2.1, 0.1, 3, 4, 0.3);
      c.require(false, "infeasible (M, t) accepted");
    } catch (const InfeasibleParams& e) {
      c.require(!e.constraint().empty(), "infeasible M = 3, M' = 4, t = 0.3: " + std::string(e.what()));
    }
  }
}

}  // namespace

int main() {
  W1 w;
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
      {"W1 builds end to end and the generating map validates", [&](Criterion& c) { c1(w, c); }},
      {"exact dimension identities", [&](Criterion& c) { c2(w, c); }},
      {"box-counting cross-check", [&](Criterion& c) { c3(w, c); }},
      {"paper-mode derivation", [&](Criterion& c) { c4(c); }},
      {"conjugacy suite", [&](Criterion& c) { c5(w, c); }},
      {"dilatation", [&](Criterion& c) { c6(w, c); }},
      {"Sobolev series and shell energy", [&](Criterion& c) { c7(w, c); }},
      {"fault injection", [&](Criterion& c) { c8(w, c); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.require(false, std::string("unexpected error: ") + e.what());
    }
    std::printf("%s %zu: %s\n", c.ok() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
    for (const auto& line : c.lines()) std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
    failed += c.ok() ? 0 : 1;
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
