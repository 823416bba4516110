#include "qce/analysis.hpp"

#include "qce/errors.hpp"
#include "qce/parallel.hpp"
#include "qce/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <stdexcept>

namespace qce {

namespace {

constexpr std::size_t kLeafBudget2d = 2048;
constexpr std::size_t kLeafBudgetNd = 4096;
constexpr std::size_t kPilotPerLeaf = 32;
constexpr int kMaxLeafDepth = 24;
constexpr std::uint64_t kPilotStream = 0x9E3779B97F4A7C15ULL;

}  // namespace

const char* to_string(DimensionMethod method) {
  switch (method) {
    case DimensionMethod::moranExact: return "moranExact";
    case DimensionMethod::cylinderExact: return "cylinderExact";
    case DimensionMethod::boxCount: return "boxCount";
  }
  return "?";
}

ScaleCount ScaleCount::from_values(double scale, double count) {
  return {scale, count, -std::log(scale), std::log(count)};
}

ScaleCount ScaleCount::from_logs(double log_inv_scale, double log_count) {
  return {std::exp(-log_inv_scale), std::exp(log_count), log_inv_scale, log_count};
}

DimensionEstimate fit_loglog(std::vector<ScaleCount> profile) {
  const std::size_t m = profile.size();
  if (m < 2) throw DegenerateFit("need at least two scales");
  double mx = 0, my = 0;
  for (const auto& s : profile) {
    mx += s.log_inv_scale;
    my += s.log_count;
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0;
  for (const auto& s : profile) {
    sxx += (s.log_inv_scale - mx) * (s.log_inv_scale - mx);
    sxy += (s.log_inv_scale - mx) * (s.log_count - my);
  }
  const bool flat = std::all_of(profile.begin(), profile.end(),
                                [&](const ScaleCount& s) { return s.count == profile.front().count; });
  if (flat) throw DegenerateFit("every scale has the same cover count");
  if (sxx == 0.0) throw DegenerateFit("scales are not distinct");
  DimensionEstimate e;
  e.method = DimensionMethod::boxCount;
  e.value = sxy / sxx;
  if (m > 2) {
    double ss = 0;
    for (const auto& s : profile) {
      const double r = s.log_count - my - e.value * (s.log_inv_scale - mx);
      ss += r * r;
    }
    e.slope_stderr = std::sqrt(ss / static_cast<double>(m - 2) / sxx);
  }
  e.per_scale = std::move(profile);
  return e;
}

std::size_t grid_cover_count(const std::vector<Vec>& cloud, double scale, const Vec& offset) {
  if (cloud.empty()) return 0;
  const int n = static_cast<int>(cloud.front().size());
  Vec lo = cloud.front();
  for (const Vec& p : cloud) lo = lo.cwiseMin(p);
  const Vec shift = offset.size() == n ? offset : Vec::Zero(n);
  std::vector<std::vector<long long>> keys(cloud.size(), std::vector<long long>(n));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (int j = 0; j < n; ++j) keys[i][j] = static_cast<long long>(std::floor((cloud[i][j] - lo[j]) / scale + shift[j]));
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

double mean_cover_count(const std::vector<Vec>& cloud, double scale, int shifts) {
  if (cloud.empty()) return 0.0;
  if (shifts < 1) throw std::invalid_argument("mean_cover_count needs shifts >= 1");
  const int n = static_cast<int>(cloud.front().size());
  std::size_t grids = 1;
  for (int j = 0; j < n; ++j) grids *= static_cast<std::size_t>(shifts);
  std::vector<std::size_t> counts(grids);
  parallel_for(grids, [&](std::size_t g) {
    Vec offset(n);
    std::size_t rest = g;
    for (int j = 0; j < n; ++j) {
      offset[j] = static_cast<double>(rest % shifts) / shifts;
      rest /= shifts;
    }
    counts[g] = grid_cover_count(cloud, scale, offset);
  });
  return static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0})) / static_cast<double>(grids);
}

DimensionEstimate box_counting_dimension(const std::vector<Vec>& cloud, const std::vector<double>& scales,
                                         int shifts) {
  if (cloud.empty()) throw DegenerateFit("empty point cloud");
  std::vector<ScaleCount> profile;
  for (double s : scales) profile.push_back(ScaleCount::from_values(s, mean_cover_count(cloud, s, shifts)));
  return fit_loglog(std::move(profile));
}

DimensionEstimate moran_dimension_base(const ConstructionInstance& inst) {
  DimensionEstimate e;
  e.method = DimensionMethod::moranExact;
  e.value = static_cast<double>(inst.params.M_ln / -inst.params.d_ln);
  return e;
}

DimensionEstimate cylinder_dimension_fiber(const ConstructionInstance& inst, int levels) {
  DimensionEstimate e;
  e.method = DimensionMethod::cylinderExact;
  e.value = static_cast<double>(inst.params.Mprime_ln / -inst.params.t_ln);
  for (int k = 1; k <= levels; ++k) {
    e.per_scale.push_back(ScaleCount::from_logs(static_cast<double>(-k * inst.params.t_ln),
                                                static_cast<double>(k * inst.params.Mprime_ln)));
  }
  return e;
}

// ---------------------------------------------------------------------------

std::vector<Vec> direction_set(int n, int count, std::uint64_t seed) {
  std::vector<Vec> dirs;
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
    return dirs;
  }
  const int m = 2 * n * 16;
  for (int k = 0; k < m; ++k) {
    Vec u(n);
    for (int j = 0; j < n; ++j) {
      // Box-Muller from two counter-based uniforms.
      const double u1 = 1.0 - uniform01(seed, static_cast<std::uint64_t>(k), 2 * j);
      const double u2 = uniform01(seed, static_cast<std::uint64_t>(k), 2 * j + 1);
      u[j] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    dirs.push_back(u.normalized());
  }
  return dirs;
}

namespace {

struct SingularRange {
  double max = 0.0;
  double min = std::numeric_limits<double>::infinity();

  void add(const Mat& J) {
    Eigen::JacobiSVD<Mat> svd(J);
    const auto& s = svd.singularValues();
    max = std::max(max, s.maxCoeff());
    min = std::min(min, s.minCoeff());
  }
};

}  // namespace

QcSample qc_ratio_at(const MapWithJacobian& f, const Vec& x, double r, const std::vector<Vec>& dirs) {
  QcSample s;
  s.x = x;
  s.r = r;
  SingularRange range;
  const PhiValue fx = f(x);
  if (fx.jacobian) {
    range.add(*fx.jacobian);
    s.det = fx.jacobian->determinant();
  }
  s.l = std::numeric_limits<double>::infinity();
  for (const Vec& u : dirs) {
    const PhiValue end = f(x + r * u);
    const double dist = (end.point - fx.point).norm();
    s.L = std::max(s.L, dist);
    s.l = std::min(s.l, dist);
    if (end.jacobian) range.add(*end.jacobian);
    const PhiValue mid = f(x + 0.5 * r * u);
    if (mid.jacobian) range.add(*mid.jacobian);
  }
  s.ratio = s.L / s.l;
  s.oracle = range.max > 0.0 ? range.max / range.min : std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::vector<Vec> qc_sample_points(const ConstructionInstance& inst, const GeneratingMap& gm,
                                  const QcSampleOptions& opt) {
  const auto total = static_cast<double>(inst.product.count());
  std::vector<Vec> pts(opt.points);
  for (std::size_t i = 0; i < opt.points; ++i) {
    std::vector<BigCount> w(opt.level);
    for (std::size_t l = 0; l < opt.level; ++l)
      w[l] = static_cast<std::uint64_t>(uniform01(opt.seed, i, 100 + l) * total);
    pts[i] = compose_domain_word(inst, w).apply(sample_shell(gm, opt.seed, i));
  }
  return pts;
}

QCRatioStats qc_ratio_sample(const ConstructionInstance& inst, const GeneratingMap& gm,
                             const QcSampleOptions& opt) {
  const auto pts = qc_sample_points(inst, gm, opt);
  const auto dirs = direction_set(inst.dim(), opt.directions, opt.seed);
  const std::size_t nr = opt.radii.size();
  QCRatioStats st;
  st.samples.resize(pts.size() * nr);
  parallel_for(pts.size(), [&](std::size_t i) {
    PhiEvaluator ev(gm);
    const MapWithJacobian f = [&](const Vec& y) { return evaluate_Phi(inst, &gm, y, kDefaultDepthLimit, &ev); };
    for (std::size_t k = 0; k < nr; ++k) st.samples[i * nr + k] = qc_ratio_at(f, pts[i], opt.radii[k], dirs);
  });
  st.min_det = std::numeric_limits<double>::infinity();
  for (const auto& s : st.samples) {
    st.max_ratio = std::max(st.max_ratio, s.ratio);
    st.max_oracle = std::max(st.max_oracle, s.oracle);
    st.min_det = std::min(st.min_det, s.det);
  }
  const AnalyticBound b = analytic_qc_bound(inst);
  st.analytic_bound = b.bound;
  st.analytic_kappa = b.kappa;
  return st;
}

// ---------------------------------------------------------------------------

SobolevReport sobolev_energy(const ConstructionInstance& inst, const GeneratingMap* gm,
                             std::size_t sample_count, std::uint64_t seed) {
  const auto& P = inst.params;
  SobolevReport rep;
  rep.q_ln = sobolev_factor_ln(P.n, P.p, P.d_ln, P.t_ln, P.M_ln, P.Mprime_ln);
  rep.q = static_cast<double>(std::exp(rep.q_ln));
  if (rep.q_ln >= 0.0L) throw DivergentSeries(rep.q);
  if (!gm) return rep;

  const int n = inst.dim();
  const std::size_t leaf_budget = n == 2 ? kLeafBudget2d : kLeafBudgetNd;
  if (sample_count < 2 * leaf_budget) {
    throw std::invalid_argument("sobolev_energy needs at least " + std::to_string(2 * leaf_budget) + " samples");
  }
  const Box Q = inst.domain_box();
  const double q_vol = Q.extents().prod();

  auto integrand = [&](PhiEvaluator& ev, const Vec& x) {
    if (inst.product.locate(x, true)) return 0.0;
    Eigen::JacobiSVD<Mat> svd(ev.eval_unchecked(x).jacobian);
    return std::pow(svd.singularValues().maxCoeff(), P.p);
  };
  struct Leaf {
    Box box;
    std::uint64_t id = 0;
    double mean = 0.0;
    double var = 0.0;
    int depth = 0;
    double score() const { return box.extents().prod() * std::sqrt(var); }
  };
  auto measure = [&](PhiEvaluator& ev, Leaf& leaf, std::size_t m, std::uint64_t stream) {
    const Vec ext = leaf.box.extents();
    double sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
      Vec x(n);
      for (int j = 0; j < n; ++j) {
        x[j] = leaf.box.lo[j] + ext[j] * uniform01(seed ^ stream, (leaf.id << 32) | i, j);
      }
      const double f = integrand(ev, x);
      sum += f;
      sum2 += f * f;
    }
    const double dm = static_cast<double>(m);
    leaf.mean = sum / dm;
    leaf.var = std::max(0.0, (sum2 - dm * leaf.mean * leaf.mean) / (dm - 1));
  };
  auto measure_all = [&](std::vector<Leaf>& leaves, std::size_t from) {
    parallel_for(leaves.size() - from, [&](std::size_t i) {
      PhiEvaluator ev(*gm);
      measure(ev, leaves[from + i], kPilotPerLeaf, kPilotStream);
    });
  };

  // Pilot tree on its own random stream, independent of sample_count: split
  // the leaves carrying the largest volume * sd until the budget is reached.
  std::vector<Leaf> leaves{Leaf{Q, 0, 0.0, 0.0, 0}};
  std::uint64_t next_id = 1;
  measure_all(leaves, 0);
  const std::size_t children = std::size_t{1} << n;
  while (leaves.size() + children - 1 <= leaf_budget) {
    std::vector<std::size_t> order(leaves.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return leaves[i].score() > leaves[j].score(); });
    const std::size_t room = (leaf_budget - leaves.size()) / (children - 1);
    const std::size_t batch = std::min({room, std::max<std::size_t>(1, leaves.size() / 8), order.size()});
    std::vector<Leaf> kept, split;
    std::vector<bool> chosen(leaves.size(), false);
    std::size_t picked = 0;
    for (std::size_t i : order) {
      if (picked == batch) break;
      if (leaves[i].var == 0.0 || leaves[i].depth >= kMaxLeafDepth) continue;
      chosen[i] = true;
      ++picked;
    }
    if (picked == 0) break;
    for (std::size_t i = 0; i < leaves.size(); ++i) (chosen[i] ? split : kept).push_back(leaves[i]);
    const std::size_t from = kept.size();
    for (const Leaf& parent : split) {
      const Vec mid = parent.box.center();
      for (std::size_t c = 0; c < children; ++c) {
        Leaf child;
        child.box = parent.box;
        for (int j = 0; j < n; ++j) ((c >> j) & 1 ? child.box.lo[j] : child.box.hi[j]) = mid[j];
        child.id = next_id++;
        child.depth = parent.depth + 1;
        kept.push_back(std::move(child));
      }
    }
    leaves = std::move(kept);
    measure_all(leaves, from);
  }

  // Allocation: a quarter proportional to volume, the rest to volume * sd.
  const double total_score = std::accumulate(leaves.begin(), leaves.end(), 0.0,
                                             [](double acc, const Leaf& l) { return acc + l.score(); });
  std::vector<std::size_t> count(leaves.size());
  for (std::size_t s = 0; s < leaves.size(); ++s) {
    const double vol_share = leaves[s].box.extents().prod() / q_vol;
    const double share = total_score > 0 ? 0.25 * vol_share + 0.75 * leaves[s].score() / total_score : vol_share;
    count[s] = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(share * static_cast<double>(sample_count))));
  }
  parallel_for(leaves.size(), [&](std::size_t s) {
    PhiEvaluator ev(*gm);
    measure(ev, leaves[s], count[s], 0);
  });
  double est = 0, v = 0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < leaves.size(); ++s) {
    const double vol = leaves[s].box.extents().prod();
    est += vol * leaves[s].mean;
    v += vol * vol * leaves[s].var / static_cast<double>(count[s]);
    used += count[s];
  }
  sample_count = used;
  const std::size_t strata = leaves.size();
  rep.shell_estimated = true;
  rep.shell_energy = est;
  rep.halfwidth = 2.576 * std::sqrt(v);
  rep.total_bound = est / (1.0 - rep.q);
  rep.sample_count = sample_count;
  rep.strata = strata;
  return rep;
}

}  // namespace qce
