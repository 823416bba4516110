#include "qce/verify.hpp"

#include "qce/analysis.hpp"
#include "qce/elevator.hpp"
#include "qce/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qce {

bool VerifyReport::hard_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed || !c.hard; });
}

std::size_t VerifyReport::warnings() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const VerifyCheck& c) { return !c.passed && !c.hard; }));
}

namespace {

std::string fmt(long double v) {
  std::ostringstream os;
  os.precision(12);
  os << static_cast<double>(v);
  return os.str();
}

class Recorder {
 public:
  explicit Recorder(VerifyReport& rep) : rep_(rep) {}

  void hard(const std::string& suite, std::string name, bool ok, std::string detail = "") {
    rep_.checks.push_back({suite, std::move(name), ok, true, std::move(detail)});
  }
  void soft(const std::string& suite, std::string name, bool ok, std::string detail = "") {
    rep_.checks.push_back({suite, std::move(name), ok, false, std::move(detail)});
  }
  void number(std::string name, double value) { rep_.numbers.emplace_back(std::move(name), value); }
  void note(std::string text) { rep_.notes.push_back(std::move(text)); }

  // Runs body; any library error becomes a failed hard check.
  template <class F>
  void guarded(const std::string& suite, const std::string& name, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      hard(suite, name, false, e.what());
    }
  }

 private:
  VerifyReport& rep_;
};

void params_suite(const ConstructionInstance& inst, Recorder& r) {
  const auto& P = inst.params;
  r.number("betaAchieved", P.beta_achieved);
  r.number("alphaAchieved", P.alpha_achieved);
  r.number("q", P.q);
  if (P.mode == ParamMode::paper) {
    for (const auto& c : audit_paper_params(P).checks) r.hard("params", c.name, c.passed, c.detail);
    for (std::size_t i = 0; i < P.bounds.size(); ++i) r.number("bound" + std::to_string(i + 1), P.bounds[i]);
    return;
  }
  r.guarded("params", "direct constraints", [&] {
    check_direct_params(P.n, P.p, P.d, P.M, P.Mprime, P.t);
    r.hard("params", "direct constraints", true, "M < d^-(n-1), M' < 1/d, M M' < t^-n, q < 1");
  });
}

void ifs_suite(const ConstructionInstance& inst, Recorder& r) {
  const auto& P = inst.params;
  r.guarded("ifs", "product system strongly separated", [&] {
    const auto c = verify_strong_separation(inst.product);
    r.hard("ifs", "product system strongly separated", c.margin > 0.0, "margin " + fmt(c.margin));
  });
  r.guarded("ifs", "target system strongly separated", [&] {
    const auto c = verify_strong_separation(inst.target);
    r.hard("ifs", "target system strongly separated", c.margin > 0.0, "margin " + fmt(c.margin));
  });
  for (const auto& s : inst.spot_checks) r.hard("ifs", "spot check " + s.system + " #" + s.index, s.passed, s.detail);

  const double dim_e = moran_dimension_base(inst).value;
  const double dim_e_sim = similarity_dimension(inst.base);
  r.number("dimE", dim_e);
  r.hard("ifs", "dim E = ln M / ln(1/d)", std::abs(dim_e - dim_e_sim) <= 1e-12,
         fmt(dim_e) + " vs similarity dimension " + fmt(dim_e_sim));
  const auto fiber = cylinder_dimension_fiber(inst);
  r.number("fiberImageDim", fiber.value);
  if (P.Mprime > 1) {
    const double fit = fit_loglog(fiber.per_scale).value;
    r.hard("ifs", "cylinder cover profile fits ln M' / ln(1/t)", std::abs(fit - fiber.value) <= 1e-12,
           "fit " + fmt(fit) + ", exact " + fmt(fiber.value));
  }
  if (P.beta) {
    const long double excess = P.M_ln + static_cast<long double>(*P.beta) * P.d_ln;
    r.hard("ifs", "dim E > beta", excess > 0.0L, "ln M - beta ln(1/d) = " + fmt(excess));
  }
  if (P.alpha) {
    const long double excess = P.Mprime_ln + static_cast<long double>(*P.alpha) * P.t_ln;
    r.hard("ifs", "fiber-image dimension > alpha", excess > 0.0L, "ln M' - alpha ln(1/t) = " + fmt(excess));
  }
}

void genmap_suite(const GeneratingMap& gm, const VerifyOptions& o, Recorder& r) {
  const auto rep = validate_generating_map(gm, o.genmap);
  for (const auto& c : rep.checks) r.hard("genmap", c.name, c.passed, c.detail);
  r.number("moves", static_cast<double>(gm.script.size()));
  r.number("epsilon", gm.epsilon);
}

void elevator_suite(const ConstructionInstance& inst, const GeneratingMap* gm, const VerifyOptions& o,
                    Recorder& r) {
  const auto b = analytic_qc_bound(inst);
  r.number("kappa", b.kappa);
  r.number("rhoDom", b.rho_dom);
  r.number("rhoTar", b.rho_tar);
  r.number("qcBound", b.bound);
  r.number("qcBoundLn", static_cast<double>(b.bound_ln));
  r.hard("elevator", "analytic dilatation bound is finite", std::isfinite(static_cast<double>(b.bound_ln)),
         "kappa " + std::to_string(b.kappa) + ", ln bound " + fmt(b.bound_ln));
  if (!gm) return;
  r.guarded("elevator", "Phi maps domain cylinders into target cylinders", [&] {
    const auto a = audit_cylinder_conjugacy(inst, *gm, 6, o.conjugacy_per_depth, o.seed);
    r.hard("elevator", "Phi maps domain cylinders into target cylinders", a.failures == 0,
           std::to_string(a.failures) + " of " + std::to_string(a.samples) + " failed" +
               (a.first_failure.empty() ? "" : "; " + a.first_failure));
  });
  r.guarded("elevator", "Phi(K) = K_J by address", [&] {
    const auto a = audit_invariant_set_image(inst, *gm, o.invariant_points, 6, o.seed);
    r.hard("elevator", "Phi(K) = K_J by address", a.failures == 0,
           std::to_string(a.failures) + " of " + std::to_string(a.samples) + " failed" +
               (a.first_failure.empty() ? "" : "; " + a.first_failure));
  });
}

void analysis_suite(const ConstructionInstance& inst, const GeneratingMap* gm, const VerifyOptions& o,
                    Recorder& r) {
  const auto& P = inst.params;
  const double exact = cylinder_dimension_fiber(inst).value;
  if (P.mode == ParamMode::direct && P.Mprime > 1) {
    const auto depth = std::min<std::size_t>(
        o.cloud_depth, static_cast<std::size_t>(std::floor(std::log(1e6) / static_cast<double>(P.Mprime_ln))));
    if (depth >= 3) {
      r.guarded("analysis", "box-counting estimate of the fiber image", [&] {
        const auto fiber = FiberSpec::parse(o.fiber);
        fiber.check(inst);
        const auto cloud = fiber_image_cloud(inst, fiber, depth);
        std::vector<double> scales;
        for (std::size_t k = 1; k < depth; ++k) scales.push_back(std::pow(P.t, static_cast<double>(k)));
        const auto e = box_counting_dimension(cloud, scales);
        r.number("boxCountFiberDim", e.value);
        r.soft("analysis", "box-counting estimate of the fiber image", std::abs(e.value - exact) <= 0.05,
               fmt(e.value) + " +- " + fmt(e.slope_stderr) + " vs exact " + fmt(exact) + " (tolerance 0.05)");
      });
    } else {
      r.note("box counting skipped: M' too large for a depth-3 cloud");
    }
  } else if (P.mode == ParamMode::paper) {
    r.note("box counting and sampled suites skipped (paper-mode magnitude)");
  }

  if (gm) {
    r.guarded("analysis", "sampled dilatation", [&] {
      QcSampleOptions qo;
      qo.points = o.qc_points;
      qo.seed = o.seed;
      const auto st = qc_ratio_sample(inst, *gm, qo);
      r.number("maxRatio", st.max_ratio);
      r.number("maxOracle", st.max_oracle);
      r.number("minJacobianDet", st.min_det);
      r.hard("analysis", "sampled jacobian determinants positive", st.min_det > 0.0, "min " + fmt(st.min_det));
      r.hard("analysis", "sampled max ratio finite and within 1.1 x conditioning oracle",
             std::isfinite(st.max_ratio) && st.max_ratio <= 1.1 * st.max_oracle,
             "max ratio " + fmt(st.max_ratio) + ", oracle " + fmt(st.max_oracle));
    });
  }

  try {
    const auto s = sobolev_energy(inst, gm, gm ? o.sobolev_samples : 0, o.seed);
    r.hard("analysis", "Sobolev series factor q < 1", true, "q = " + fmt(s.q));
    if (s.shell_estimated) {
      r.number("shellEnergy", s.shell_energy);
      r.number("shellHalfwidth", s.halfwidth);
      r.number("totalEnergyBound", *s.total_bound);
      const auto d = sobolev_energy(inst, gm, 2 * o.sobolev_samples, o.seed);
      const double ratio = d.halfwidth / s.halfwidth;
      r.number("halfwidthRatioPerDoubling", ratio);
      r.soft("analysis", "shell energy halfwidth ratio per doubling in [0.6, 0.85]", ratio >= 0.6 && ratio <= 0.85,
             fmt(ratio) + " (" + std::to_string(o.sobolev_samples) + " -> " + std::to_string(2 * o.sobolev_samples) +
                 " samples)");
    }
  } catch (const DivergentSeries& e) {
    r.hard("analysis", "Sobolev series factor q < 1", false, e.what());
  }
}

}  // namespace

VerifyReport run_verify(const ConstructionInstance& inst, const GeneratingMap* gm, const VerifyOptions& options) {
  VerifyReport rep;
  Recorder r(rep);
  params_suite(inst, r);
  ifs_suite(inst, r);
  if (gm) {
    genmap_suite(*gm, options, r);
  } else {
    r.note("no generating map: genmap and shell suites skipped");
  }
  elevator_suite(inst, gm, options, r);
  analysis_suite(inst, gm, options, r);
  return rep;
}

}  // namespace qce
