#include "qce/elevator.hpp"

#include "qce/errors.hpp"
#include "qce/parallel.hpp"
#include "qce/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qce {

FiberSpec FiberSpec::parse(const std::string& text) {
  Address a = Address::parse(text);
  if (!a.infinite()) {
    a.period = a.prefix;
    a.prefix.clear();
  }
  if (a.period.empty()) throw BadAddress("fiber seed is empty");
  return FiberSpec{a};
}

void FiberSpec::check(const ConstructionInstance& inst) const {
  if (base.period.empty()) throw BadAddress("fiber seed is empty");
  base.check_alphabet(inst.base.count);
}

AddressPoint FiberSpec::base_point(const ConstructionInstance& inst, std::size_t depth) const {
  check(inst);
  return point_from_address(inst.base, base, depth);
}

namespace {

Similarity product_map(const ConstructionInstance& inst, BigCount k) {
  const BigCount mp = inst.fiber.count;
  return inst.product.map(static_cast<std::uint64_t>(k / mp), static_cast<std::uint64_t>(k % mp));
}

}  // namespace

Similarity compose_target_word(const ConstructionInstance& inst, const std::vector<BigCount>& word) {
  Similarity out = Similarity::identity(inst.dim());
  for (BigCount k : word) out = compose(out, inst.target.map(k));
  return out;
}

Similarity compose_domain_word(const ConstructionInstance& inst, const std::vector<BigCount>& word) {
  Similarity out = Similarity::identity(inst.dim());
  for (BigCount k : word) out = compose(out, product_map(inst, k));
  return out;
}

PhiValue evaluate_Phi(const ConstructionInstance& inst, const GeneratingMap* gm, const Vec& x,
                      int depth_limit, PhiEvaluator* evaluator) {
  const int n = inst.dim();
  const Box Q = inst.domain_box();
  PhiValue out;
  if (!Q.contains_closed(x)) {
    const AffineMap T = inst.exterior();
    out.point = T.apply(x);
    out.jacobian = T.linear;
    return out;
  }
  const double tol = 1e-12 * Q.diameter();
  const BigCount mp = inst.fiber.count;
  Similarity g = Similarity::identity(n);     // g_{sigma|level}
  Similarity hinv = Similarity::identity(n);  // h_{sigma|level}^-1
  Vec y = x;
  for (int level = 0;; ++level) {
    const auto i = inst.base.locate(y.head(n - 1), false, tol);
    const auto j = i ? inst.fiber.locate(y.tail(1), false, tol) : std::nullopt;
    if (!i || !j) {
      if (!gm) throw NeedsGeneratingMap("point lies in a shell at depth " + std::to_string(level));
      PhiEvaluator local(*gm);
      PhiEvaluator& ev = evaluator ? *evaluator : local;
      const auto r = ev.eval(y);
      out.point = g.apply(r.point);
      out.jacobian = g.linear() * r.jacobian * hinv.linear();
      return out;
    }
    if (level == depth_limit) {
      const Box S = inst.target_box();
      out.point = g.apply(S.center());
      out.error_bound = std::exp(static_cast<double>(inst.params.t_ln) * depth_limit) * S.diameter();
      return out;
    }
    const BigCount k = static_cast<BigCount>(*i) * mp + *j;
    out.address.push_back(k);
    const Similarity h = inst.product.map(*i, *j);
    const Similarity h_inv = h.inverse();
    y = h_inv.apply(y);
    hinv = compose(h_inv, hinv);
    g = compose(g, inst.target.map(k));
  }
}

std::vector<BigCount> combine_word(const ConstructionInstance& inst, const Address& sigma,
                                   const std::vector<std::uint64_t>& tau) {
  const auto s = sigma.truncate(tau.size());
  std::vector<BigCount> word(tau.size());
  for (std::size_t l = 0; l < tau.size(); ++l) {
    if (s[l] >= inst.base.count || tau[l] >= inst.fiber.count) throw BadAddress("symbol out of range");
    word[l] = static_cast<BigCount>(s[l]) * inst.fiber.count + tau[l];
  }
  return word;
}

std::vector<Vec> fiber_image_cloud(const ConstructionInstance& inst, const FiberSpec& fiber,
                                   std::size_t depth) {
  fiber.check(inst);
  const BigCount mp = inst.fiber.count;
  BigCount total = 1;
  for (std::size_t l = 0; l < depth; ++l) {
    total *= mp;
    if (total > kCloudBudget) {
      throw BudgetExceeded("M'^depth exceeds the enumeration budget of " +
                           std::to_string(kCloudBudget) + " points");
    }
  }
  const auto m = static_cast<std::uint64_t>(mp);
  const auto sigma = fiber.base.truncate(depth);
  const Vec center = inst.target_box().center();

  // Small alphabets get a per-level table of target maps.
  std::vector<std::vector<Similarity>> table;
  if (depth * m <= 100000) {
    table.resize(depth);
    for (std::size_t l = 0; l < depth; ++l)
      for (std::uint64_t tau = 0; tau < m; ++tau)
        table[l].push_back(inst.target.map(static_cast<BigCount>(sigma[l]) * mp + tau));
  }

  std::vector<Vec> cloud(static_cast<std::size_t>(total));
  parallel_for(cloud.size(), [&](std::size_t idx) {
    Vec p = center;
    std::uint64_t rest = idx;
    for (std::size_t l = depth; l-- > 0;) {
      const std::uint64_t tau = rest % m;
      rest /= m;
      p = table.empty() ? inst.target.map(static_cast<BigCount>(sigma[l]) * mp + tau).apply(p)
                        : table[l][tau].apply(p);
    }
    cloud[idx] = std::move(p);
  });
  return cloud;
}

int minimal_kappa(long double ratio_ln, long double threshold_ln) {
  if (threshold_ln > 0.0L) return 1;
  int k = static_cast<int>(std::floor(threshold_ln / ratio_ln)) + 2;
  while (k > 1 && (k - 2) * ratio_ln < threshold_ln) --k;
  while (!((k - 1) * ratio_ln < threshold_ln)) ++k;
  return k;
}

AnalyticBound analytic_qc_bound(const ConstructionInstance& inst) {
  AnalyticBound b;
  b.rho_dom = inst.product_cert.margin;
  b.rho_tar = inst.target_cert.margin;
  const double diam_q = inst.domain_box().diameter();
  const double diam_s = inst.target_box().diameter();
  const long double thr_ln = std::log(static_cast<long double>(b.rho_dom) / (2.0L * diam_q));
  b.kappa = minimal_kappa(inst.params.d_ln, thr_ln);
  b.bound_ln = std::log(2.0L * diam_s) - (1 + b.kappa) * inst.params.t_ln -
               std::log(static_cast<long double>(b.rho_tar));
  b.bound = b.bound_ln > std::log(std::numeric_limits<double>::max())
                ? std::numeric_limits<double>::infinity()
                : static_cast<double>(std::exp(b.bound_ln));
  return b;
}

std::vector<BigCount> locate_target_address(const ConstructionInstance& inst, const Vec& y,
                                            std::size_t depth, double tol) {
  std::vector<BigCount> word;
  Vec z = y;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto k = inst.target.locate(z, false, tol);
    if (!k) return {};
    word.push_back(*k);
    z = inst.target.map(*k).inverse().apply(z);
  }
  return word;
}

namespace {

std::vector<BigCount> random_product_word(const ConstructionInstance& inst, std::uint64_t seed,
                                          std::uint64_t stream, std::size_t len) {
  const auto total = static_cast<double>(inst.product.count());
  std::vector<BigCount> w(len);
  for (std::size_t l = 0; l < len; ++l) {
    const double u = uniform01(seed ^ 0xA5A5A5A5ULL, (stream << 8) | l, 7);
    w[l] = std::min<BigCount>(static_cast<BigCount>(u * total), inst.product.count() - 1);
  }
  return w;
}

std::string format_word(const std::vector<BigCount>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + to_string(w[i] + 1);
  return out.empty() ? "(empty)" : out;
}

}  // namespace

CylinderAudit audit_cylinder_conjugacy(const ConstructionInstance& inst, const GeneratingMap& gm,
                                       std::size_t max_depth, std::size_t per_depth, std::uint64_t seed) {
  const Box Q = inst.domain_box();
  const Box S = inst.target_box();
  const int n = inst.dim();
  CylinderAudit audit;
  PhiEvaluator ev(gm);
  for (std::size_t depth = 0; depth <= max_depth; ++depth) {
    for (std::uint64_t s = 0; s < per_depth; ++s) {
      const std::uint64_t stream = depth * per_depth + s;
      const auto w = random_product_word(inst, seed, stream, depth);
      Vec u(n);
      for (int j = 0; j < n; ++j) u[j] = uniform01(seed, stream, 16 + j);
      const Vec x = compose_domain_word(inst, w).apply(Q.at(u));
      const Vec y = evaluate_Phi(inst, &gm, x, kDefaultDepthLimit, &ev).point;
      const Box cyl = compose_target_word(inst, w).image(S);
      ++audit.samples;
      if (!cyl.contains_closed(y, 1e-12 * S.diameter())) {
        if (audit.failures++ == 0) audit.first_failure = "word " + format_word(w) + " leaves its target cylinder";
      }
    }
  }
  return audit;
}

CylinderAudit audit_invariant_set_image(const ConstructionInstance& inst, const GeneratingMap& gm,
                                        std::size_t count, std::size_t depth, std::uint64_t seed) {
  CylinderAudit audit;
  PhiEvaluator ev(gm);
  for (std::uint64_t s = 0; s < count; ++s) {
    const auto w = random_product_word(inst, seed, 1'000'000 + s, depth + 2);
    Address a;
    for (BigCount k : w) a.prefix.push_back(static_cast<std::uint64_t>(k));
    a.period = {static_cast<std::uint64_t>(random_product_word(inst, seed, 2'000'000 + s, 1).front())};
    const Vec x = point_from_address(inst.product, a, 40).point;
    const PhiValue v = evaluate_Phi(inst, &gm, x, static_cast<int>(depth), &ev);
    const std::vector<BigCount> expect(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(depth));
    ++audit.samples;
    if (v.address != expect || locate_target_address(inst, v.point, depth) != expect) {
      if (audit.failures++ == 0) audit.first_failure = "address " + format_word(expect) + " is not preserved";
    }
  }
  return audit;
}

}  // namespace qce
