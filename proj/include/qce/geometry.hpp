#pragma once

// Geometric primitives shared by every stage of the construction: open
// axis-aligned boxes, signed axis permutations, similarities and affine maps,
// and simplices with an orientation predicate.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace qce {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Open box prod (lo_i, hi_i). Most predicates take a tolerance so callers can
/// decide whether a point on the boundary counts.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_);

  static Box cube(const Vec& center, double half_side);

  int dim() const { return static_cast<int>(lo.size()); }
  double extent(int axis) const { return hi[axis] - lo[axis]; }
  Vec extents() const { return hi - lo; }
  Vec center() const { return 0.5 * (lo + hi); }
  double diameter() const { return (hi - lo).norm(); }
  double volume() const;
  double min_extent() const { return (hi - lo).minCoeff(); }

  /// x in the closed box enlarged by tol.
  bool contains_closed(const Vec& x, double tol = 0.0) const;
  /// x in the open box shrunk by tol.
  bool contains_open(const Vec& x, double tol = 0.0) const;
  /// Closure of other lies in this open box with at least `margin` to spare.
  bool contains_box(const Box& other, double margin = 0.0) const;

  Box expanded(double margin) const;

  /// Point with normalized coordinates u in [0,1]^n.
  Vec at(const Vec& u) const { return lo + u.cwiseProduct(hi - lo); }

  bool operator==(const Box& other) const { return lo == other.lo && hi == other.hi; }
};

/// Euclidean distance between the closures of two boxes (0 if they meet).
double box_distance(const Box& a, const Box& b);

/// Distance from the closure of `inner` to the complement of the open box
/// `outer`; negative when inner's closure is not inside outer.
double boundary_margin(const Box& inner, const Box& outer);

/// x -> y with y[i] = signs[i] * x[perm[i]]. Stored 0-based.
class SignedPermutation {
 public:
  SignedPermutation() = default;
  SignedPermutation(std::vector<int> perm, std::vector<int> signs);

  static SignedPermutation identity(int n);
  /// 90 degree rotation in the coordinate plane (a, b): e_a -> e_b, e_b -> -e_a.
  static SignedPermutation quarter_turn(int n, int a, int b);
  static SignedPermutation from_matrix(const Mat& m);

  int dim() const { return static_cast<int>(perm_.size()); }
  const std::vector<int>& perm() const { return perm_; }
  const std::vector<int>& signs() const { return signs_; }

  Vec apply(const Vec& x) const;
  Mat matrix() const;
  int determinant() const;
  bool is_identity() const;

  /// (a * b)(x) = a(b(x)).
  SignedPermutation operator*(const SignedPermutation& other) const;
  SignedPermutation inverse() const;
  bool operator==(const SignedPermutation& other) const = default;

 private:
  std::vector<int> perm_;
  std::vector<int> signs_;
};

/// x -> scale * rot(x) + shift.
struct Similarity {
  double scale = 1.0;
  SignedPermutation rot;
  Vec shift;

  static Similarity identity(int n);

  int dim() const { return rot.dim(); }
  Vec apply(const Vec& x) const { return scale * rot.apply(x) + shift; }
  Mat linear() const { return scale * rot.matrix(); }
  Similarity inverse() const;
  /// Image of a box; again an axis-aligned box.
  Box image(const Box& b) const;
};

/// (a * b)(x) = a(b(x)).
Similarity compose(const Similarity& a, const Similarity& b);
Similarity invert(const Similarity& s);

/// General affine map x -> linear * x + shift.
struct AffineMap {
  Mat linear;
  Vec shift;

  static AffineMap identity(int n);
  static AffineMap from(const Similarity& s);
  /// Diagonal positive map carrying the box `from` onto the box `to`.
  static AffineMap box_to_box(const Box& from, const Box& to);

  int dim() const { return static_cast<int>(shift.size()); }
  Vec apply(const Vec& x) const { return linear * x + shift; }
  AffineMap inverse() const;
};

AffineMap compose(const AffineMap& a, const AffineMap& b);

enum class Orientation { positive, negative, degenerate };

/// Relative degeneracy threshold: |det| <= kDegenerateTol * scale^n.
inline constexpr double kDegenerateTol = 1e-14;

/// Determinant of the edge vectors v_i - v_0 (n! times the signed volume).
double simplex_determinant(std::span<const Vec> vertices);
Orientation simplex_orientation(std::span<const Vec> vertices);
double simplex_volume(std::span<const Vec> vertices);

/// One simplex of a piecewise-linear map together with the affine map fixed by
/// its vertex correspondence.
struct AffinePiece {
  std::vector<Vec> domain;
  std::vector<Vec> target;
  Mat linear;
  Vec shift;
  Mat to_barycentric;  // maps x - domain[0] to barycentric coords 1..n
  Vec bbox_lo;
  Vec bbox_hi;

  AffinePiece() = default;
  AffinePiece(std::vector<Vec> domain_vertices, std::vector<Vec> target_vertices);

  int dim() const { return static_cast<int>(domain.front().size()); }
  Vec apply(const Vec& x) const { return linear * x + shift; }
  /// Smallest barycentric coordinate of x (>= 0 iff inside the closed simplex).
  double min_barycentric(const Vec& x) const;
  bool bbox_contains(const Vec& x, double tol) const;
};

}  // namespace qce
