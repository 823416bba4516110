#pragma once

// Dimension estimators, sampled metric dilatation and the Sobolev energy
// series of the generated map.

#include "qce/elevator.hpp"
#include "qce/genmap.hpp"
#include "qce/ifs.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace qce {

enum class DimensionMethod { moranExact, cylinderExact, boxCount };

const char* to_string(DimensionMethod method);

struct ScaleCount {
  double scale = 0.0;
  double count = 0.0;
  // Logs are kept separately so huge cover counts stay exact in log space.
  double log_inv_scale = 0.0;
  double log_count = 0.0;

  static ScaleCount from_values(double scale, double count);
  static ScaleCount from_logs(double log_inv_scale, double log_count);
};

struct DimensionEstimate {
  DimensionMethod method = DimensionMethod::boxCount;
  double value = 0.0;
  std::vector<ScaleCount> per_scale;
  double slope_stderr = 0.0;  // 0 for exact methods and two-point fits
};

/// Least-squares slope of log count against log(1/scale). Throws
/// DegenerateFit with fewer than two distinct scales or when every count is
/// equal.
DimensionEstimate fit_loglog(std::vector<ScaleCount> profile);

/// Occupied cells of the grid of side `scale` anchored at the componentwise
/// minimum of the cloud, shifted by offset * scale (offset empty = no shift).
std::size_t grid_cover_count(const std::vector<Vec>& cloud, double scale, const Vec& offset = Vec());

/// Mean of grid_cover_count over the shifts^n offsets {0, 1/shifts, ...}^n.
/// A single anchored grid quantizes badly at coarse scales; the mean tracks
/// the volume of the scale-neighbourhood of the set instead.
double mean_cover_count(const std::vector<Vec>& cloud, double scale, int shifts = 4);

/// Log-log fit of mean_cover_count over the given scales.
DimensionEstimate box_counting_dimension(const std::vector<Vec>& cloud, const std::vector<double>& scales,
                                         int shifts = 4);

/// dim E = ln M / ln(1/d) for the base Cantor set.
DimensionEstimate moran_dimension_base(const ConstructionInstance& inst);
/// ln M' / ln(1/t) with the exact cover profile (t^k, M'^k), k = 1..levels.
DimensionEstimate cylinder_dimension_fiber(const ConstructionInstance& inst, int levels = 8);

// ---------------------------------------------------------------------------

/// Unit directions: `count` equispaced angles for n = 2, else 2n*16 random
/// unit vectors from the seed.
std::vector<Vec> direction_set(int n, int count = 64, std::uint64_t seed = 0x5EED);

/// A map together with its jacobian where the jacobian is known.
using MapWithJacobian = std::function<PhiValue(const Vec&)>;

struct QcSample {
  Vec x;
  double r = 0.0;
  double L = 0.0;  // max |f(x) - f(x + r u)|
  double l = 0.0;  // min |f(x) - f(x + r u)|
  double ratio = 0.0;
  /// max sigma_max / min sigma_min over the jacobians met at x, x + r u / 2 and
  /// x + r u: a bound for L / l when the circle stays in those simplices.
  double oracle = 0.0;
  double det = 0.0;  // jacobian determinant at x (0 if unknown)
};

QcSample qc_ratio_at(const MapWithJacobian& f, const Vec& x, double r, const std::vector<Vec>& dirs);

struct QCRatioStats {
  std::vector<QcSample> samples;
  double max_ratio = 0.0;
  double max_oracle = 0.0;
  double min_det = 0.0;
  double analytic_bound = 0.0;
  int analytic_kappa = 0;
};

struct QcSampleOptions {
  std::size_t points = 1000;
  std::size_t level = 1;  // sample points in h_w(shell) for random words of this length
  std::vector<double> radii{1e-3, 1e-4};
  int directions = 64;
  std::uint64_t seed = 0x5EED;
};

/// Shell sample points at the requested level.
std::vector<Vec> qc_sample_points(const ConstructionInstance& inst, const GeneratingMap& gm,
                                  const QcSampleOptions& options);

/// Samples of L/l for Phi; data parallel, deterministic for a fixed seed.
QCRatioStats qc_ratio_sample(const ConstructionInstance& inst, const GeneratingMap& gm,
                             const QcSampleOptions& options = {});

// ---------------------------------------------------------------------------

struct SobolevReport {
  double q = 0.0;
  long double q_ln = 0.0L;
  bool shell_estimated = false;
  double shell_energy = 0.0;     // C, the integral of |D phi|^p over the shell
  double halfwidth = 0.0;        // 99% confidence halfwidth of C
  std::optional<double> total_bound;  // C / (1 - q)
  std::size_t sample_count = 0;
  std::size_t strata = 0;
};

/// q = M M' (t/d)^p d^n from the instance parameters (log space); throws
/// DivergentSeries when q >= 1. With gm, C is estimated by stratified Monte
/// Carlo of the operator norm of D phi to the power p.
SobolevReport sobolev_energy(const ConstructionInstance& inst, const GeneratingMap* gm,
                             std::size_t sample_count, std::uint64_t seed = 0x5EED);

}  // namespace qce
