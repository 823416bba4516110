#pragma once

// Packed similarity systems and the assembled construction instance.
//
// A PackedSystem never stores its maps: the translation of map k is computed
// from k on demand, so paper-mode systems with ~1e21 branches are as cheap as
// a dozen-map desk instance. Layout arithmetic runs in long double; the
// double-precision Similarity/Box accessors are meant for materializable
// systems.

#include "qce/geometry.hpp"
#include "qce/params.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qce {

using BigCount = unsigned __int128;

std::string to_string(BigCount value);
BigCount parse_big_count(const std::string& text);

/// Largest branch count for which maps and holes are materialized explicitly.
inline constexpr std::uint64_t kMaterializeLimit = 1'000'000;

struct SeparationCert {
  /// Half the distance from the union of image closures to the complement of
  /// the domain box (the proof's d for the domain, delta for the target).
  double margin = 0.0;
  /// Distance from the union of image closures to the complement of the box.
  double boundary_distance = 0.0;
  /// Smallest distance between two distinct image closures (+inf for one map).
  double pairwise_gap = 0.0;
};

/// K orientation-preserving similarities of ratio r on an n-dimensional box.
/// Heights are a_i = K^((n-i)/n), images are stacked with uniform gaps along
/// axis 0 and centered on every other axis. The rotation part cycles the axes
/// L_n -> L_1 -> ... -> L_{n-1} -> L_n, with the sign of axis 0 flipped when the
/// raw cycle is orientation reversing.
struct PackedSystem {
  int n = 1;
  long double ratio = 0.5L;
  BigCount count = 1;
  std::vector<long double> heights;        // domain box is prod (0, heights[i])
  long double gap = 0.0L;                  // spacing between images along axis 0
  std::vector<long double> offsets;        // lower corner of every image on axes >= 1
  std::vector<long double> image_extents;  // extents of every image box
  SignedPermutation rot;
  std::vector<long double> rot_lo;  // lower corner of ratio * rot(domain box)

  Box domain_box() const;
  bool materializable() const { return count <= kMaterializeLimit; }
  std::uint64_t size() const;  // throws unless the count fits in 64 bits

  /// Lower corner of image box k, in long double.
  std::vector<long double> image_lo(BigCount k) const;
  Box image_box(std::uint64_t k) const;
  Similarity map(BigCount k) const;

  /// Index of the image box containing x (closed, or open when strict).
  std::optional<std::uint64_t> locate(const Vec& x, bool strict = false, double tol = 0.0) const;

  /// Closed-form separation certificate (no enumeration).
  SeparationCert certificate() const;
};

/// Throws InfeasibleParams unless 1 <= K < r^-n.
PackedSystem build_rect_packing(int n, long double ratio, BigCount K);

/// Explicit list of similarities on a box (used for hand-built systems and as
/// the brute-force counterpart of the closed-form certificates).
struct ExplicitSystem {
  Box domain;
  std::vector<Similarity> maps;
};

ExplicitSystem materialize(const PackedSystem& sys);

/// Pairwise/containment check; throws SeparationViolation with a witness.
SeparationCert verify_strong_separation(const ExplicitSystem& sys);
/// Closed-form certificate plus materialized checks when the system is small;
/// large systems are spot-checked at a few indices in extended precision.
SeparationCert verify_strong_separation(const PackedSystem& sys);

/// Unique s with count * ratio^s = 1.
double similarity_dimension(BigCount count, long double ratio);
double similarity_dimension(const PackedSystem& sys);

/// h_{i,j}(x) = (h_i(x_1..x_{n-1}), h'_j(x_n)) on Q = Q_{n-1} x (0,1). Flat
/// index k = i * M' + j (0-based).
struct ProductSystem {
  PackedSystem base;
  PackedSystem fiber;

  int dim() const { return base.n + 1; }
  BigCount count() const { return base.count * fiber.count; }
  long double ratio() const { return base.ratio; }
  Box domain_box() const;

  Similarity map(std::uint64_t i, std::uint64_t j) const;
  Similarity map(std::uint64_t k) const;
  Box image_box(std::uint64_t k) const;
  std::optional<std::uint64_t> locate(const Vec& x, bool strict = false, double tol = 0.0) const;

  SeparationCert certificate() const;
};

ExplicitSystem materialize(const ProductSystem& sys);
SeparationCert verify_strong_separation(const ProductSystem& sys);
double similarity_dimension(const ProductSystem& sys);

/// Finite or eventually periodic symbol sequence. Symbols are 0-based in
/// memory; the text form is 1-based, comma separated, with an optional
/// "|period" suffix, e.g. "2,1|3" = 2,1,3,3,3,...
struct Address {
  std::vector<std::uint64_t> prefix;
  std::vector<std::uint64_t> period;

  static Address parse(const std::string& text);
  static Address constant(std::uint64_t symbol);
  std::string format() const;

  bool infinite() const { return !period.empty(); }
  /// Number of available symbols (SIZE_MAX when periodic).
  std::size_t length() const;
  std::uint64_t at(std::size_t i) const;
  /// First k symbols; throws BadAddress if fewer are available.
  std::vector<std::uint64_t> truncate(std::size_t k) const;
  /// Throws BadAddress if a symbol is out of range.
  void check_alphabet(BigCount alphabet) const;
};

struct AddressPoint {
  Vec point;
  double error_bound = 0.0;
};

/// f_{sigma|depth}(center of the box) with error bound ratio^depth * diam(box).
AddressPoint point_from_address(const PackedSystem& sys, const Address& addr, std::size_t depth);
AddressPoint point_from_address(const ProductSystem& sys, const Address& addr, std::size_t depth);

/// f_{s_1} o ... o f_{s_k} for the given symbols.
Similarity compose_word(const PackedSystem& sys, const std::vector<std::uint64_t>& word);
Similarity compose_word(const ProductSystem& sys, const std::vector<std::uint64_t>& word);

struct IndexSpotCheck {
  std::string system;
  std::string index;
  bool passed = false;
  std::string detail;
};

struct ConstructionInstance {
  InstanceParams params;
  PackedSystem base;    // M maps of ratio d on Q_{n-1}
  PackedSystem fiber;   // M' maps of ratio d on (0,1)
  ProductSystem product;
  PackedSystem target;  // M M' maps of ratio t on S
  SeparationCert product_cert;
  SeparationCert target_cert;
  std::vector<IndexSpotCheck> spot_checks;  // large (symbolic) systems only

  int dim() const { return params.n; }
  Box domain_box() const { return product.domain_box(); }
  Box target_box() const { return target.domain_box(); }
  BigCount hole_count() const { return target.count; }
  bool materializable() const { return target.materializable(); }
  /// Diagonal map carrying the closed box Q onto S; used verbatim outside Q.
  AffineMap exterior() const;
};

ConstructionInstance build_instance_systems(const InstanceParams& params);

}  // namespace qce
