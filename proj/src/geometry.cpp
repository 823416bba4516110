#include "qce/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qce {

Box::Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw std::invalid_argument("Box: dimension mismatch");
  for (int i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("Box: requires lo < hi on every axis");
  }
}

Box Box::cube(const Vec& center, double half_side) {
  Vec h = Vec::Constant(center.size(), half_side);
  return Box(center - h, center + h);
}

double Box::volume() const { return (hi - lo).prod(); }

bool Box::contains_closed(const Vec& x, double tol) const {
  for (int i = 0; i < lo.size(); ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

bool Box::contains_open(const Vec& x, double tol) const {
  for (int i = 0; i < lo.size(); ++i) {
    if (!(x[i] > lo[i] + tol && x[i] < hi[i] - tol)) return false;
  }
  return true;
}

bool Box::contains_box(const Box& other, double margin) const {
  for (int i = 0; i < lo.size(); ++i) {
    if (!(other.lo[i] > lo[i] + margin && other.hi[i] < hi[i] - margin)) return false;
  }
  return true;
}

Box Box::expanded(double margin) const {
  Vec m = Vec::Constant(lo.size(), margin);
  return Box(lo - m, hi + m);
}

double box_distance(const Box& a, const Box& b) {
  double sq = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double gap = std::max({0.0, b.lo[i] - a.hi[i], a.lo[i] - b.hi[i]});
    sq += gap * gap;
  }
  return std::sqrt(sq);
}

double boundary_margin(const Box& inner, const Box& outer) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < inner.dim(); ++i) {
    m = std::min({m, inner.lo[i] - outer.lo[i], outer.hi[i] - inner.hi[i]});
  }
  return m;
}

// ---------------------------------------------------------------------------

SignedPermutation::SignedPermutation(std::vector<int> perm, std::vector<int> signs)
    : perm_(std::move(perm)), signs_(std::move(signs)) {
  const int n = static_cast<int>(perm_.size());
  if (static_cast<int>(signs_.size()) != n) {
    throw std::invalid_argument("SignedPermutation: perm/signs size mismatch");
  }
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n; ++i) {
    if (perm_[i] < 0 || perm_[i] >= n || seen[perm_[i]]) {
      throw std::invalid_argument("SignedPermutation: not a permutation");
    }
    seen[perm_[i]] = true;
    if (signs_[i] != 1 && signs_[i] != -1) {
      throw std::invalid_argument("SignedPermutation: signs must be +-1");
    }
  }
}

SignedPermutation SignedPermutation::identity(int n) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  return SignedPermutation(perm, std::vector<int>(n, 1));
}

SignedPermutation SignedPermutation::quarter_turn(int n, int a, int b) {
  // y_b = x_a, y_a = -x_b
  auto r = identity(n);
  r.perm_[b] = a;
  r.perm_[a] = b;
  r.signs_[a] = -1;
  return r;
}

SignedPermutation SignedPermutation::from_matrix(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> perm(n, -1), signs(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (std::abs(m(i, j)) > 0.5) {
        perm[i] = j;
        signs[i] = m(i, j) > 0 ? 1 : -1;
      }
    }
  }
  return SignedPermutation(perm, signs);
}

Vec SignedPermutation::apply(const Vec& x) const {
  Vec y(x.size());
  for (int i = 0; i < dim(); ++i) y[i] = signs_[i] * x[perm_[i]];
  return y;
}

Mat SignedPermutation::matrix() const {
  Mat m = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) m(i, perm_[i]) = signs_[i];
  return m;
}

int SignedPermutation::determinant() const {
  // sign of the permutation via cycle decomposition, times the product of signs
  const int n = dim();
  std::vector<bool> seen(n, false);
  int det = 1;
  for (int i = 0; i < n; ++i) {
    det *= signs_[i];
    if (seen[i]) continue;
    int len = 0;
    for (int j = i; !seen[j]; j = perm_[j]) {
      seen[j] = true;
      ++len;
    }
    if (len % 2 == 0) det = -det;
  }
  return det;
}

bool SignedPermutation::is_identity() const {
  for (int i = 0; i < dim(); ++i) {
    if (perm_[i] != i || signs_[i] != 1) return false;
  }
  return true;
}

SignedPermutation SignedPermutation::operator*(const SignedPermutation& other) const {
  // (a*b)(x)_i = s_a[i] * b(x)[p_a[i]] = s_a[i] * s_b[p_a[i]] * x[p_b[p_a[i]]]
  std::vector<int> perm(dim()), signs(dim());
  for (int i = 0; i < dim(); ++i) {
    perm[i] = other.perm_[perm_[i]];
    signs[i] = signs_[i] * other.signs_[perm_[i]];
  }
  return SignedPermutation(perm, signs);
}

SignedPermutation SignedPermutation::inverse() const {
  std::vector<int> perm(dim()), signs(dim());
  for (int i = 0; i < dim(); ++i) {
    perm[perm_[i]] = i;
    signs[perm_[i]] = signs_[i];
  }
  return SignedPermutation(perm, signs);
}

// ---------------------------------------------------------------------------

Similarity Similarity::identity(int n) {
  return Similarity{1.0, SignedPermutation::identity(n), Vec::Zero(n)};
}

Similarity Similarity::inverse() const { return invert(*this); }

Box Similarity::image(const Box& b) const {
  const Vec p = apply(b.lo);
  const Vec q = apply(b.hi);
  return Box(p.cwiseMin(q), p.cwiseMax(q));
}

Similarity compose(const Similarity& a, const Similarity& b) {
  // a(b(x)) = sa Ra (sb Rb x + vb) + va
  return Similarity{a.scale * b.scale, a.rot * b.rot, a.scale * a.rot.apply(b.shift) + a.shift};
}

Similarity invert(const Similarity& s) {
  const SignedPermutation rinv = s.rot.inverse();
  return Similarity{1.0 / s.scale, rinv, -(rinv.apply(s.shift)) / s.scale};
}

AffineMap AffineMap::identity(int n) { return AffineMap{Mat::Identity(n, n), Vec::Zero(n)}; }

AffineMap AffineMap::from(const Similarity& s) { return AffineMap{s.linear(), s.shift}; }

AffineMap AffineMap::box_to_box(const Box& from, const Box& to) {
  const Vec scale = to.extents().cwiseQuotient(from.extents());
  Mat lin = scale.asDiagonal();
  return AffineMap{lin, to.lo - scale.cwiseProduct(from.lo)};
}

AffineMap AffineMap::inverse() const {
  Mat inv = linear.inverse();
  return AffineMap{inv, -(inv * shift)};
}

AffineMap compose(const AffineMap& a, const AffineMap& b) {
  return AffineMap{a.linear * b.linear, a.linear * b.shift + a.shift};
}

// ---------------------------------------------------------------------------

namespace {

Mat edge_matrix(std::span<const Vec> v) {
  const int n = static_cast<int>(v.front().size());
  Mat e(n, n);
  for (int j = 0; j < n; ++j) e.col(j) = v[j + 1] - v[0];
  return e;
}

double max_edge(std::span<const Vec> v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) m = std::max(m, (v[i] - v[j]).norm());
  }
  return m;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

double simplex_determinant(std::span<const Vec> vertices) {
  return edge_matrix(vertices).determinant();
}

Orientation simplex_orientation(std::span<const Vec> vertices) {
  const int n = static_cast<int>(vertices.front().size());
  const double det = simplex_determinant(vertices);
  const double scale = max_edge(vertices);
  if (std::abs(det) <= kDegenerateTol * std::pow(scale, n)) return Orientation::degenerate;
  return det > 0 ? Orientation::positive : Orientation::negative;
}

double simplex_volume(std::span<const Vec> vertices) {
  const int n = static_cast<int>(vertices.front().size());
  return simplex_determinant(vertices) / factorial(n);
}

AffinePiece::AffinePiece(std::vector<Vec> domain_vertices, std::vector<Vec> target_vertices)
    : domain(std::move(domain_vertices)), target(std::move(target_vertices)) {
  const int n = static_cast<int>(domain.front().size());
  if (static_cast<int>(domain.size()) != n + 1 || target.size() != domain.size()) {
    throw std::invalid_argument("AffinePiece: expects n+1 vertices on both sides");
  }
  const Mat de = edge_matrix(domain);
  const Mat te = edge_matrix(target);
  to_barycentric = de.inverse();
  linear = te * to_barycentric;
  shift = target[0] - linear * domain[0];
  bbox_lo = domain[0];
  bbox_hi = domain[0];
  for (const Vec& v : domain) {
    bbox_lo = bbox_lo.cwiseMin(v);
    bbox_hi = bbox_hi.cwiseMax(v);
  }
}

double AffinePiece::min_barycentric(const Vec& x) const {
  const Vec b = to_barycentric * (x - domain[0]);
  return std::min(1.0 - b.sum(), b.minCoeff());
}

bool AffinePiece::bbox_contains(const Vec& x, double tol) const {
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < bbox_lo[i] - tol || x[i] > bbox_hi[i] + tol) return false;
  }
  return true;
}

}  // namespace qce
