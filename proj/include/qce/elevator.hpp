#pragma once

// The generated map Phi: Phi = T outside Q, and on each cylinder
// h_sigma(Q) minus its holes Phi = g_sigma o phi o h_sigma^-1.

#include "qce/genmap.hpp"
#include "qce/ifs.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qce {

/// A line pi^-1(a) of the foliation, with a in the base Cantor set given by a
/// periodic address over the M base symbols.
struct FiberSpec {
  Address base;

  /// "seed|period" in the 1-based address syntax; a bare seed is repeated.
  static FiberSpec parse(const std::string& text);
  /// Throws BadAddress unless the seed is nonempty and all symbols are < M.
  void check(const ConstructionInstance& inst) const;
  /// The base point a in the first n-1 coordinates (error bound d^depth diam).
  AddressPoint base_point(const ConstructionInstance& inst, std::size_t depth = 40) const;
};

struct PhiValue {
  Vec point;
  double error_bound = 0.0;       // 0 when evaluated exactly through phi or T
  std::optional<Mat> jacobian;    // present for exact evaluations
  std::vector<BigCount> address;  // flat product symbols i * M' + j descended
};

inline constexpr int kDefaultDepthLimit = 12;

/// Phi(x). Descends the domain cylinders containing x; exact when x lies in a
/// shell at depth <= depthLimit, otherwise the image is the center of the
/// matching target cylinder with bound t^depthLimit diam S. Throws
/// NeedsGeneratingMap when a shell point is hit and gm is absent. An evaluator
/// may be passed to reuse its point-location cache (it must wrap gm).
PhiValue evaluate_Phi(const ConstructionInstance& inst, const GeneratingMap* gm, const Vec& x,
                      int depth_limit = kDefaultDepthLimit, PhiEvaluator* evaluator = nullptr);

/// Flat target symbols for (sigma|depth, tau) with k = sigma_i * M' + tau_i.
std::vector<BigCount> combine_word(const ConstructionInstance& inst, const Address& sigma,
                                   const std::vector<std::uint64_t>& tau);

/// g_{k_1} o ... o g_{k_m} over the target system.
Similarity compose_target_word(const ConstructionInstance& inst, const std::vector<BigCount>& word);
/// h_{k_1} o ... o h_{k_m} over the product system.
Similarity compose_domain_word(const ConstructionInstance& inst, const std::vector<BigCount>& word);

inline constexpr std::uint64_t kCloudBudget = 10'000'000;

/// g_{(sigma|depth, tau)}(center of S) for every tau in lexicographic order;
/// exactly M'^depth points. Throws BudgetExceeded above kCloudBudget.
std::vector<Vec> fiber_image_cloud(const ConstructionInstance& inst, const FiberSpec& fiber,
                                   std::size_t depth);

struct AnalyticBound {
  double rho_dom = 0.0;
  double rho_tar = 0.0;
  int kappa = 1;
  double bound = 0.0;       // 2 diam S / (t^(1+kappa) rho_tar); may be +inf
  long double bound_ln = 0.0L;
};

/// Least integer kappa >= 1 with (kappa - 1) * ratio_ln < threshold_ln.
int minimal_kappa(long double ratio_ln, long double threshold_ln);

/// kappa is the least integer >= 1 with d^(kappa-1) < rho_dom / (2 diam Q).
AnalyticBound analytic_qc_bound(const ConstructionInstance& inst);

struct CylinderAudit {
  std::size_t samples = 0;
  std::size_t failures = 0;
  std::string first_failure;  // empty when failures == 0
};

/// For random product words w of every length 0..max_depth, x = h_w(u) with u
/// uniform in Q must satisfy Phi(x) in the closure of g_w(S) (tolerance
/// 1e-12 diam S). Deterministic for a fixed seed.
CylinderAudit audit_cylinder_conjugacy(const ConstructionInstance& inst, const GeneratingMap& gm,
                                       std::size_t max_depth = 6, std::size_t per_depth = 300,
                                       std::uint64_t seed = 0x5EED);

/// Points of the invariant set K given by random addresses must land, under
/// Phi at the given depth limit, in the target cylinder with the same address.
CylinderAudit audit_invariant_set_image(const ConstructionInstance& inst, const GeneratingMap& gm,
                                        std::size_t count = 200, std::size_t depth = 6,
                                        std::uint64_t seed = 0x5EED);

/// Flat target address of the depth-k cylinder of S containing y, or empty
/// when y leaves the cylinder tree before depth k.
std::vector<BigCount> locate_target_address(const ConstructionInstance& inst, const Vec& y,
                                            std::size_t depth, double tol = 0.0);

}  // namespace qce
