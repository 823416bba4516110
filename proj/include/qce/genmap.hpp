#pragma once

// The piecewise-linear generating map phi on the fundamental shell.
//
// phi = (script of moves) o T on the closed domain box Q minus the open holes,
// and phi = T outside Q. Every move is a PL homeomorphism of R^n that is the
// identity outside its support box W and affine inside its inner box A, so
// the composition is a PL homeomorphism carrying each T(hole) onto the
// matching target hole with the prescribed affine boundary map.

#include "qce/geometry.hpp"
#include "qce/ifs.hpp"
#include "qce/params.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace qce {

enum class MoveKind { frameRemap, corridorTranslate, twist };

const char* to_string(MoveKind kind);

struct Move {
  MoveKind kind = MoveKind::frameRemap;
  Box support;       // W
  Box inner_before;  // A
  Box inner_after;   // B
  SignedPermutation inner_rotation;  // twist only; identity otherwise
  int layers = 1;
  AffineMap inner_map;  // affine on A, carrying A onto B
  std::vector<AffinePiece> cells;  // cover closure(W) \ A onto closure(W) \ B
  /// Nested domain layer boxes rings[0] = A, ..., rings[L] = W; the cells of
  /// layer l (between rings[l] and rings[l+1]) are stored contiguously.
  std::vector<Box> rings;

  /// Identity outside W, inner_map inside A, the matching cell in between.
  /// `hint` is the index of the last cell hit (updated); returns the cell
  /// used, -1 for the inner map, -2 for the identity.
  Vec apply(const Vec& x, std::size_t& hint, Mat* jacobian = nullptr, long* used = nullptr) const;
};

/// Ring complex between nested boxes rings[0] (inner) and rings.back()
/// (support). The boundary of the unit cube is triangulated with N
/// subdivisions per axis; each layer prism is split into n simplices. Cells
/// are layer-major. `target(u, l)` gives the image of the vertex at
/// normalized boundary coordinates u (entries k/N) on ring l.
std::vector<AffinePiece> build_ring_cells(const std::vector<Box>& rings, int subdivisions,
                                          const std::function<Vec(const Vec&, int)>& target,
                                          std::size_t move_id = 0);

/// Same with the evenly spaced rings C_l = lerp(A, W, l/L).
std::vector<AffinePiece> build_ring_cells(const Box& W, const Box& A, int layers, int subdivisions,
                                          const std::function<Vec(const Vec&, int)>& target,
                                          std::size_t move_id = 0);

/// Nested boxes from inner (l = 0) to outer (l = L) whose extents grow
/// geometrically; each side keeps its relative position between the two.
std::vector<Box> geometric_rings(const Box& inner, const Box& outer, int layers);

/// Orientation, volume and boundary checks for one move; throws
/// MoveValidationFailure naming the first offending simplex.
void validate_move(const Move& m, std::size_t move_id = 0);

/// Frame remap: identity on the boundary of W, diagonal affine A -> B on the
/// boundary of A. Domain and target rings are geometric; the layer count
/// follows the larger of the two frame moduli max_i ln(W_i / A_i),
/// max_i ln(W_i / B_i) so that each layer grows by at most ~30%.
Move build_frame_remap(const Box& W, const Box& A, const Box& B, std::size_t move_id = 0);

/// Twist: identity on the boundary of W, rho about the center of A on the
/// boundary of A. A must be a cube concentric with W. The layer count starts
/// at `layers` and is doubled up to 16 until validation passes.
Move build_twist(const Box& W, const Box& A, const SignedPermutation& rho, int layers = 4,
                 std::size_t move_id = 0);

/// Planar quarter turns whose product (last applied first) is rho.
std::vector<SignedPermutation> quarter_turn_factors(const SignedPermutation& rho);

/// Holes rejected by the planner beyond this count.
inline constexpr std::uint64_t kMaxPlannedHoles = 1'000'000;

struct GeneratingMap {
  int n = 2;
  Box Q;
  Box S;
  AffineMap T;                       // exterior affine map, Q onto S
  ProductSystem product;             // domain system (hole lookup)
  std::vector<Similarity> hole_maps;    // h_k
  std::vector<Similarity> target_maps;  // g_k
  std::vector<AffineMap> prescribed;    // g_k o T o h_k^-1, the boundary map on hole k
  SignedPermutation rotation;           // common rotation part of the hole maps
  double epsilon = 0.0;                 // side of the transport cubes
  std::vector<Move> script;
  std::vector<std::string> notes;

  std::size_t hole_count() const { return hole_maps.size(); }
  Box hole_box(std::size_t k) const { return hole_maps[k].image(Q); }
  Box target_hole_box(std::size_t k) const { return target_maps[k].image(S); }
};

struct PlanOptions {
  int twist_layers = 4;
  double epsilon_factor = 0.2;   // epsilon = factor * min hole extent
  double epsilon_floor = 1e-4;   // relative to the min gap of the domain holes; also bounds the target gap
};

/// Phase-major planner: shrink every hole to an epsilon cube, route the cubes
/// to the target centers, twist, grow. Throws PlanningFailure when no script
/// is found above the epsilon floor or the instance is too large.
GeneratingMap plan_moves(const ConstructionInstance& instance, const PlanOptions& options = {});

/// Per-evaluator point-location cache; not shareable between threads.
class PhiEvaluator {
 public:
  explicit PhiEvaluator(const GeneratingMap& gm);

  struct Result {
    Vec point;
    Mat jacobian;
    std::vector<std::pair<std::size_t, long>> trace;  // (move, cell) actually used
  };

  /// phi(x). Throws PointInHole inside an open hole.
  Result eval(const Vec& x, bool with_trace = false);
  Vec point(const Vec& x) { return eval(x).point; }

  /// The composite without the hole check (the natural PL extension).
  Result eval_unchecked(const Vec& x, bool with_trace = false);

  const GeneratingMap& map() const { return *gm_; }

 private:
  const GeneratingMap* gm_;
  std::vector<std::size_t> hints_;
};

/// Convenience one-shot evaluation.
PhiEvaluator::Result evaluate_phi(const GeneratingMap& gm, const Vec& x);

struct GenmapValidationOptions {
  std::size_t boundary_samples = 1000;    // per hole and on the boundary of Q
  std::size_t injectivity_pairs = 100000;
  std::size_t orientation_samples = 20000;
  std::uint64_t seed = 0x5EED;
};

/// Report-style validation: per-move checks, boundary conditions, conjugacy,
/// injectivity and orientation. Never throws for a failed check.
ValidationReport validate_generating_map(const GeneratingMap& gm,
                                         const GenmapValidationOptions& options = {});

/// Uniform sample of the shell Q \ holes (rejection sampling, counter-based).
Vec sample_shell(const GeneratingMap& gm, std::uint64_t seed, std::uint64_t index);

/// Point on the boundary of a box from two counter-based uniforms streams.
Vec sample_box_boundary(const Box& b, std::uint64_t seed, std::uint64_t index);

/// max over cells traversed of sigma_max/sigma_min of the composed linear part
/// is bounded by the product of per-move conditionings; this returns, for the
/// composite at x, the condition number of the jacobian.
double condition_number(const Mat& J);

}  // namespace qce
