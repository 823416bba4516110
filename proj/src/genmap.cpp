#include "qce/genmap.hpp"

#include "qce/errors.hpp"
#include "qce/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <tuple>

namespace qce {

const char* to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::frameRemap:
      return "frameRemap";
    case MoveKind::corridorTranslate:
      return "corridorTranslate";
    case MoveKind::twist:
      return "twist";
  }
  return "?";
}

namespace {

constexpr double kBaryTol = 1e-9;
constexpr double kHintTol = 1e-12;
constexpr double kFrameLayerGrowth = 1.3;
// Planar frames are subdivided for lower distortion; in 3D and up the cell
// count would grow as subdivisions^(n-1) per layer.
constexpr int kFrameSubdivisions2d = 4;
constexpr double kClearanceWeight = 10.0;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

Box lerp_box(const Box& a, const Box& b, int l, int L) {
  if (l == 0) return a;
  if (l == L) return b;
  const double s = static_cast<double>(l) / L;
  return Box(a.lo + s * (b.lo - a.lo), a.hi + s * (b.hi - a.hi));
}

std::vector<Box> lerp_rings(const Box& A, const Box& W, int L) {
  std::vector<Box> rings;
  for (int l = 0; l <= L; ++l) rings.push_back(lerp_box(A, W, l, L));
  return rings;
}

bool is_cube(const Box& b) {
  const Vec e = b.extents();
  return (e.maxCoeff() - e.minCoeff()) <= 1e-12 * e.maxCoeff();
}

// L-infinity distance between two closed boxes given by corners.
double linf_distance(const Vec& lo1, const Vec& hi1, const Vec& lo2, const Vec& hi2) {
  double d = 0.0;
  for (int i = 0; i < lo1.size(); ++i) d = std::max({d, lo2[i] - hi1[i], lo1[i] - hi2[i]});
  return d;
}

// Smallest pairwise distance among boxes and to the complement of `outer`.
double min_free_gap(const std::vector<Box>& boxes, const Box& outer) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& b : boxes) best = std::min(best, boundary_margin(b, outer));
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return boxes[a].lo[0] < boxes[b].lo[0]; });
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (boxes[order[b]].lo[0] - boxes[order[a]].hi[0] >= best) break;
      best = std::min(best, box_distance(boxes[order[a]], boxes[order[b]]));
    }
  }
  return best;
}

// Facets of the boundary of the unit cube, N subdivisions per axis, as lists
// of n grid points (integer coordinates).
std::vector<std::vector<std::vector<int>>> boundary_facets(int n, int N) {
  std::vector<std::vector<std::vector<int>>> out;
  for (int axis = 0; axis < n; ++axis) {
    std::vector<int> others;
    for (int i = 0; i < n; ++i) {
      if (i != axis) others.push_back(i);
    }
    const int m = n - 1;
    std::vector<int> perm(m);
    for (int side : {0, N}) {
      std::vector<int> cell(m, 0);
      while (true) {
        std::iota(perm.begin(), perm.end(), 0);
        do {
          std::vector<std::vector<int>> simplex;
          std::vector<int> v(n, 0);
          v[axis] = side;
          for (int i = 0; i < m; ++i) v[others[i]] = cell[i];
          simplex.push_back(v);
          for (int i = 0; i < m; ++i) {
            v[others[perm[i]]] += 1;
            simplex.push_back(v);
          }
          out.push_back(std::move(simplex));
        } while (std::next_permutation(perm.begin(), perm.end()));
        int i = 0;
        while (i < m && ++cell[i] == N) cell[i++] = 0;
        if (i == m) break;
      }
    }
  }
  return out;
}

long grid_id(const std::vector<int>& u, int N) {
  long id = 0;
  for (std::size_t i = u.size(); i-- > 0;) id = id * (N + 1) + u[i];
  return id;
}

Move identity_twist(const Box& W, const Box& A, int n) {
  Move m;
  m.kind = MoveKind::twist;
  m.support = W;
  m.inner_before = A;
  m.inner_after = A;
  m.inner_rotation = SignedPermutation::identity(n);
  m.inner_map = AffineMap::identity(n);
  m.layers = 1;
  m.rings = lerp_rings(A, W, 1);
  m.cells = build_ring_cells(m.rings, 1, [&](const Vec& u, int l) { return l == 0 ? A.at(u) : W.at(u); });
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

Vec Move::apply(const Vec& x, std::size_t& hint, Mat* jacobian, long* used) const {
  if (!support.contains_open(x)) {
    if (used) *used = -2;
    return x;
  }
  if (inner_before.contains_closed(x)) {
    if (jacobian) *jacobian = inner_map.linear * *jacobian;
    if (used) *used = -1;
    return inner_map.apply(x);
  }
  std::size_t best = cells.size();
  if (hint < cells.size() && cells[hint].bbox_contains(x, kHintTol) &&
      cells[hint].min_barycentric(x) >= -kHintTol) {
    best = hint;
  } else {
    // With layer boxes, only the layer holding x and its neighbours are scanned.
    std::size_t first = 0;
    std::size_t last = cells.size();
    if (rings.size() >= 2) {
      const std::size_t L = rings.size() - 1;
      const std::size_t per_layer = cells.size() / L;
      std::size_t l = 1;
      while (l < L && !rings[l].contains_closed(x)) ++l;
      first = (l >= 2 ? l - 2 : 0) * per_layer;
      last = std::min(L, l + 1) * per_layer;
    }
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t c = first; c < last; ++c) {
      if (!cells[c].bbox_contains(x, kBaryTol)) continue;
      const double v = cells[c].min_barycentric(x);
      if (v > best_val) {
        best_val = v;
        best = c;
        if (v >= 0.0) break;
      }
    }
    if (best == cells.size() || best_val < -kBaryTol) {
      throw LocationFailure("no cell of the " + std::string(to_string(kind)) +
                            " move contains the point");
    }
    hint = best;
  }
  const AffinePiece& cell = cells[best];
  if (jacobian) *jacobian = cell.linear * *jacobian;
  if (used) *used = static_cast<long>(best);
  return cell.apply(x);
}

std::vector<AffinePiece> build_ring_cells(const std::vector<Box>& rings, int subdivisions,
                                          const std::function<Vec(const Vec&, int)>& target,
                                          std::size_t move_id) {
  const int n = rings.front().dim();
  const int N = subdivisions;
  const int L = static_cast<int>(rings.size()) - 1;

  // Vertex positions are cached by (grid id, layer).
  std::map<std::pair<long, int>, std::pair<Vec, Vec>> cache;
  auto vertex = [&](const std::vector<int>& g, int l) -> const std::pair<Vec, Vec>& {
    const auto key = std::make_pair(grid_id(g, N), l);
    auto it = cache.find(key);
    if (it == cache.end()) {
      Vec u(n);
      for (int i = 0; i < n; ++i) u[i] = static_cast<double>(g[i]) / N;
      it = cache.emplace(key, std::make_pair(rings[l].at(u), target(u, l))).first;
    }
    return it->second;
  };

  auto facets = boundary_facets(n, N);
  for (auto& facet : facets) {
    std::sort(facet.begin(), facet.end(), [&](const std::vector<int>& a, const std::vector<int>& b) {
      return grid_id(a, N) < grid_id(b, N);
    });
  }
  std::vector<AffinePiece> cells;
  for (int l = 0; l < L; ++l) {
    for (const auto& facet : facets) {
      for (int j = 0; j < n; ++j) {
        std::vector<Vec> dom, tar;
        for (int i = 0; i <= j; ++i) {
          const auto& v = vertex(facet[i], l);
          dom.push_back(v.first);
          tar.push_back(v.second);
        }
        for (int i = j; i < n; ++i) {
          const auto& v = vertex(facet[i], l + 1);
          dom.push_back(v.first);
          tar.push_back(v.second);
        }
        const Orientation o = simplex_orientation(dom);
        if (o == Orientation::degenerate) {
          throw MoveValidationFailure(move_id, cells.size(), "degenerate domain simplex");
        }
        if (o == Orientation::negative) {
          std::swap(dom[0], dom[1]);
          std::swap(tar[0], tar[1]);
        }
        cells.emplace_back(std::move(dom), std::move(tar));
      }
    }
  }
  return cells;
}

std::vector<AffinePiece> build_ring_cells(const Box& W, const Box& A, int layers, int subdivisions,
                                          const std::function<Vec(const Vec&, int)>& target,
                                          std::size_t move_id) {
  return build_ring_cells(lerp_rings(A, W, layers), subdivisions, target, move_id);
}

std::vector<Box> geometric_rings(const Box& inner, const Box& outer, int layers) {
  const int n = inner.dim();
  std::vector<Box> rings{inner};
  for (int l = 1; l < layers; ++l) {
    const double s = static_cast<double>(l) / layers;
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      const double ei = inner.extent(i);
      const double eo = outer.extent(i);
      const double e = std::pow(ei, 1.0 - s) * std::pow(eo, s);
      lo[i] = outer.lo[i] + (inner.lo[i] - outer.lo[i]) * (eo - e) / (eo - ei);
      hi[i] = lo[i] + e;
    }
    rings.emplace_back(lo, hi);
  }
  rings.push_back(outer);
  return rings;
}

void validate_move(const Move& m, std::size_t move_id) {
  const double scale = m.support.diameter();
  const double tol = 1e-12 * scale;
  double dom_vol = 0.0;
  double tar_vol = 0.0;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const AffinePiece& cell = m.cells[c];
    if (simplex_orientation(cell.domain) != Orientation::positive) {
      throw MoveValidationFailure(move_id, c, "domain simplex not positively oriented");
    }
    if (simplex_orientation(cell.target) != Orientation::positive) {
      throw MoveValidationFailure(move_id, c, "target simplex not positively oriented");
    }
    dom_vol += simplex_volume(cell.domain);
    tar_vol += simplex_volume(cell.target);
    for (std::size_t v = 0; v < cell.domain.size(); ++v) {
      const Vec& x = cell.domain[v];
      const Vec& y = cell.target[v];
      if (!m.support.contains_open(x, tol) && (y - x).norm() > tol) {
        throw MoveValidationFailure(move_id, c, "vertex on the support boundary moves");
      }
      if (m.inner_before.contains_closed(x, tol) && (y - m.inner_map.apply(x)).norm() > tol) {
        throw MoveValidationFailure(move_id, c, "vertex on the inner boundary misses the inner map");
      }
    }
  }
  const double want_dom = m.support.volume() - m.inner_before.volume();
  const double want_tar = m.support.volume() - m.inner_after.volume();
  if (std::abs(dom_vol - want_dom) > 1e-9 * m.support.volume()) {
    throw MoveValidationFailure(move_id, m.cells.size(),
                                "domain cells do not tile the frame: volume " + fmt(dom_vol) +
                                    " vs " + fmt(want_dom));
  }
  if (std::abs(tar_vol - want_tar) > 1e-9 * m.support.volume()) {
    throw MoveValidationFailure(move_id, m.cells.size(),
                                "target cells do not tile the frame: volume " + fmt(tar_vol) +
                                    " vs " + fmt(want_tar));
  }
}

Move build_frame_remap(const Box& W, const Box& A, const Box& B, std::size_t move_id) {
  if (!W.contains_box(A) || !W.contains_box(B)) {
    throw MoveValidationFailure(move_id, 0, "inner box not strictly inside the support");
  }
  const int n = W.dim();
  Move m;
  m.kind = MoveKind::frameRemap;
  m.support = W;
  m.inner_before = A;
  m.inner_after = B;
  m.inner_rotation = SignedPermutation::identity(n);
  m.inner_map = AffineMap::box_to_box(A, B);
  double modulus = 0.0;
  for (int i = 0; i < n; ++i) {
    modulus = std::max({modulus, std::log(W.extent(i) / A.extent(i)), std::log(W.extent(i) / B.extent(i))});
  }
  m.layers = std::clamp(static_cast<int>(std::ceil(modulus / std::log(kFrameLayerGrowth))), 1, 64);
  m.rings = geometric_rings(A, W, m.layers);
  const auto target_rings = geometric_rings(B, W, m.layers);
  m.cells = build_ring_cells(m.rings, n == 2 ? kFrameSubdivisions2d : 1,
                             [&](const Vec& u, int l) { return target_rings[l].at(u); }, move_id);
  validate_move(m, move_id);
  return m;
}

Move build_twist(const Box& W, const Box& A, const SignedPermutation& rho, int layers,
                 std::size_t move_id) {
  const int n = W.dim();
  if (rho.determinant() != 1) throw std::invalid_argument("twist rotation must preserve orientation");
  if (!W.contains_box(A)) throw MoveValidationFailure(move_id, 0, "inner box not strictly inside the support");
  if (!is_cube(A)) throw MoveValidationFailure(move_id, 0, "twist inner box must be a cube");
  if (rho.is_identity()) {
    Move m = identity_twist(W, A, n);
    validate_move(m, move_id);
    return m;
  }

  // rotation plane and angle: any planar rotation for n = 2, a single quarter
  // turn otherwise
  int plane_a = 0;
  int plane_b = 1;
  double angle = 0.0;
  if (n == 2) {
    auto q = SignedPermutation::identity(2);
    int turns = 0;
    while (!(q == rho)) {
      q = SignedPermutation::quarter_turn(2, 0, 1) * q;
      ++turns;
    }
    angle = 0.5 * M_PI * (turns == 3 ? -1 : turns);
  } else {
    plane_a = -1;
    for (int a = 0; a < n && plane_a < 0; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b && SignedPermutation::quarter_turn(n, a, b) == rho) {
          plane_a = a;
          plane_b = b;
          break;
        }
      }
    }
    if (plane_a < 0) throw std::invalid_argument("n >= 3 twists take a single planar quarter turn");
    angle = 0.5 * M_PI;
  }

  const Vec c = A.center();
  const Mat R = rho.matrix();
  Move m;
  m.kind = MoveKind::twist;
  m.support = W;
  m.inner_before = A;
  m.inner_after = A;
  m.inner_rotation = rho;
  m.inner_map = AffineMap{R, c - R * c};

  // Intermediate target layers are spheres about c between the circumsphere
  // of A and the insphere of W, turning from the full angle back to zero.
  const double r_in = 1.1 * 0.5 * A.extent(0) * std::sqrt(static_cast<double>(n));
  double r_out = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) r_out = std::min({r_out, c[i] - W.lo[i], W.hi[i] - c[i]});
  r_out *= 0.9;

  std::optional<MoveValidationFailure> last;
  for (int L = std::max(4, layers); L <= 16; L *= 2) {
    m.layers = L;
    auto target = [&, L](const Vec& u, int l) -> Vec {
      if (l == L) return W.at(u);
      if (l == 0) return m.inner_map.apply(A.at(u));
      const double s = (L == 2) ? 0.0 : static_cast<double>(l - 1) / (L - 2);
      const double r = r_in * std::pow(r_out / r_in, s);
      const double theta = angle * (1.0 - s);
      Vec v = lerp_box(A, W, l, L).at(u) - c;
      v /= v.norm();
      const double va = v[plane_a];
      const double vb = v[plane_b];
      v[plane_a] = std::cos(theta) * va - std::sin(theta) * vb;
      v[plane_b] = std::sin(theta) * va + std::cos(theta) * vb;
      return c + r * v;
    };
    try {
      if (!(r_in < r_out)) throw MoveValidationFailure(move_id, 0, "frame too thin to absorb the twist");
      m.rings = lerp_rings(A, W, L);
      m.cells = build_ring_cells(m.rings, L, target, move_id);
      validate_move(m, move_id);
      return m;
    } catch (const MoveValidationFailure& e) {
      last = e;
    }
  }
  throw MoveValidationFailure(last->move(), last->simplex(),
                              std::string("twist does not validate for any L <= 16: ") + last->what());
}

std::vector<SignedPermutation> quarter_turn_factors(const SignedPermutation& rho) {
  const int n = rho.dim();
  if (rho.determinant() != 1) throw std::invalid_argument("rotation must preserve orientation");
  if (rho.is_identity()) return {};
  std::vector<SignedPermutation> gens;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b) gens.push_back(SignedPermutation::quarter_turn(n, a, b));
    }
  }
  auto key = [](const SignedPermutation& p) {
    std::vector<int> k(p.perm());
    k.insert(k.end(), p.signs().begin(), p.signs().end());
    return k;
  };
  // breadth-first search over the rotation group; parent edges record the
  // generator applied last
  std::map<std::vector<int>, std::pair<std::vector<int>, int>> parent;
  std::queue<SignedPermutation> frontier;
  const auto id = SignedPermutation::identity(n);
  parent[key(id)] = {{}, -1};
  frontier.push(id);
  while (!frontier.empty()) {
    const SignedPermutation g = frontier.front();
    frontier.pop();
    if (g == rho) break;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const SignedPermutation h = gens[i] * g;
      if (parent.emplace(key(h), std::make_pair(key(g), static_cast<int>(i))).second) frontier.push(h);
    }
  }
  std::vector<SignedPermutation> word;
  for (auto k = key(rho); parent.at(k).second >= 0; k = parent.at(k).first) {
    word.push_back(gens[parent.at(k).second]);
  }
  std::reverse(word.begin(), word.end());
  return word;
}

// ---------------------------------------------------------------------------

namespace {

struct Router {
  int n;
  Box S;
  double eps;
  std::vector<Box> obstacles;

  bool node_free(const Vec& x) const {
    for (int i = 0; i < n; ++i) {
      if (x[i] < S.lo[i] + 1.5 * eps || x[i] > S.hi[i] - 1.5 * eps) return false;
    }
    for (const Box& ob : obstacles) {
      if (linf_distance(x, x, ob.lo, ob.hi) < 1.5 * eps) return false;
    }
    return true;
  }

  // L-infinity room around the segment: distance to the nearest obstacle and
  // to the boundary of S.
  double clearance(const Vec& a, const Vec& b) const {
    const Vec lo = a.cwiseMin(b);
    const Vec hi = a.cwiseMax(b);
    double c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) c = std::min({c, lo[i] - S.lo[i], S.hi[i] - hi[i]});
    for (const Box& ob : obstacles) c = std::min(c, linf_distance(lo, hi, ob.lo, ob.hi));
    return c;
  }

  // Shortest axis-aligned path on the grid of obstacle face lines; ties are
  // broken by grid node index.
  std::vector<Vec> route(const Vec& start, const Vec& goal) const {
    std::vector<std::vector<double>> coords(n);
    for (int i = 0; i < n; ++i) {
      auto& c = coords[i];
      c = {start[i], goal[i], S.lo[i] + 2.0 * eps, S.hi[i] - 2.0 * eps};
      for (const Box& ob : obstacles) {
        c.push_back(ob.lo[i] - 2.0 * eps);
        c.push_back(ob.hi[i] + 2.0 * eps);
      }
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      // channel midlines
      for (std::size_t j = 0, m = c.size(); j + 1 < m; ++j) c.push_back(0.5 * (c[j] + c[j + 1]));
      // unique again: zero-length edges would let the tie-break close a cycle
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      c.erase(std::remove_if(c.begin(), c.end(),
                             [&](double v) { return v < S.lo[i] + 1.5 * eps || v > S.hi[i] - 1.5 * eps; }),
              c.end());
    }
    std::vector<std::size_t> stride(n, 1);
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      stride[i] = total;
      total *= coords[i].size();
    }
    auto index_of = [&](const Vec& x) {
      std::size_t id = 0;
      for (int i = 0; i < n; ++i) {
        const auto it = std::lower_bound(coords[i].begin(), coords[i].end(), x[i]);
        id += static_cast<std::size_t>(it - coords[i].begin()) * stride[i];
      }
      return id;
    };
    auto point_of = [&](std::size_t id) {
      Vec x(n);
      for (int i = 0; i < n; ++i) {
        x[i] = coords[i][(id / stride[i]) % coords[i].size()];
      }
      return x;
    };
    const std::size_t s = index_of(start);
    const std::size_t g = index_of(goal);
    std::vector<signed char> free(total, -1);
    auto is_free = [&](std::size_t id) {
      if (free[id] < 0) free[id] = node_free(point_of(id)) ? 1 : 0;
      return free[id] == 1;
    };
    if (!is_free(s) || !is_free(g)) return {};

    std::vector<double> dist(total, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> prev(total, total);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.push({0.0, s});
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      if (u == g) break;
      const Vec xu = point_of(u);
      for (int i = 0; i < n; ++i) {
        const std::size_t ci = (u / stride[i]) % coords[i].size();
        for (int dir : {-1, 1}) {
          if ((dir < 0 && ci == 0) || (dir > 0 && ci + 1 == coords[i].size())) continue;
          const std::size_t v = dir > 0 ? u + stride[i] : u - stride[i];
          if (!is_free(v)) continue;
          const Vec xv = point_of(v);
          // Corridor distortion grows like length / clearance, so thin
          // passages are charged accordingly.
          const double room = clearance(xu, xv);
          if (room < 1.5 * eps) continue;
          const double nd = d + std::abs(xv[i] - xu[i]) * (1.0 + kClearanceWeight * eps / room);
          if (nd < dist[v] || (nd == dist[v] && u < prev[v])) {
            dist[v] = nd;
            prev[v] = u;
            pq.push({nd, v});
          }
        }
      }
    }
    if (!std::isfinite(dist[g])) return {};
    std::vector<Vec> path;
    for (std::size_t v = g; v != total; v = prev[v]) path.push_back(point_of(v));
    std::reverse(path.begin(), path.end());
    path.front() = start;
    path.back() = goal;

    // merge collinear consecutive legs
    std::vector<Vec> merged{path.front()};
    for (std::size_t i = 1; i < path.size(); ++i) {
      if (merged.size() >= 2) {
        const Vec d1 = merged.back() - merged[merged.size() - 2];
        const Vec d2 = path[i] - merged.back();
        int a1 = -1, a2 = -1;
        d1.cwiseAbs().maxCoeff(&a1);
        d2.cwiseAbs().maxCoeff(&a2);
        if (a1 == a2 && d1[a1] * d2[a2] > 0) {
          merged.back() = path[i];
          continue;
        }
      }
      merged.push_back(path[i]);
    }
    return merged;
  }
};

struct PlanContext {
  const ConstructionInstance& inst;
  GeneratingMap& gm;
  std::vector<Box> A;  // T(hole) boxes
  std::vector<Box> B;  // target holes
  std::vector<bool> skip;
  double domain_gap = 0.0;
  double target_gap = 0.0;
  int twist_layers = 4;
};

Vec choose_start(const PlanContext& ctx, std::size_t k, double eps) {
  const Box& A = ctx.A[k];
  const int n = A.dim();
  const Vec c = A.center();
  const int R = 3;
  std::vector<std::vector<int>> offsets;
  std::vector<int> o(n, -R);
  while (true) {
    offsets.push_back(o);
    int i = 0;
    while (i < n && ++o[i] > R) o[i++] = -R;
    if (i == n) break;
  }
  std::stable_sort(offsets.begin(), offsets.end(), [](const auto& a, const auto& b) {
    int ia = 0, ib = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ia = std::max(ia, std::abs(a[i]));
      ib = std::max(ib, std::abs(b[i]));
      sa += std::abs(a[i]);
      sb += std::abs(b[i]);
    }
    return std::tie(ia, sa) < std::tie(ib, sb);
  });
  const Box inner = Box(A.lo, A.hi);
  for (const auto& off : offsets) {
    Vec p = c;
    for (int i = 0; i < n; ++i) p[i] += 4.0 * eps * off[i];
    if (!inner.contains_open(p, eps)) continue;
    bool ok = true;
    for (std::size_t j = 0; j < ctx.B.size() && ok; ++j) {
      if (ctx.skip[j]) continue;
      ok = (p - ctx.B[j].center()).cwiseAbs().maxCoeff() >= 4.0 * eps;
    }
    if (ok) return p;
  }
  throw PlanningFailure("no start point for hole " + std::to_string(k + 1) + " at epsilon " + fmt(eps));
}

std::vector<Move> plan_with_epsilon(const PlanContext& ctx, double eps) {
  const std::size_t K = ctx.A.size();
  const int n = ctx.gm.n;
  std::vector<Move> script;
  auto next_id = [&] { return script.size(); };

  // A: shrink in place
  std::vector<Vec> start(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (ctx.skip[k]) continue;
    start[k] = choose_start(ctx, k, eps);
    const Box W = ctx.A[k].expanded(0.45 * ctx.domain_gap);
    script.push_back(build_frame_remap(W, ctx.A[k], Box::cube(start[k], 0.5 * eps), next_id()));
  }

  // B: route every cube to its target center
  for (std::size_t k = 0; k < K; ++k) {
    if (ctx.skip[k]) continue;
    Router router{n, ctx.gm.S, eps, {}};
    for (std::size_t j = 0; j < K; ++j) {
      if (j == k) continue;
      if (ctx.skip[j]) {
        router.obstacles.push_back(ctx.A[j]);
      } else {
        router.obstacles.push_back(Box::cube(j < k ? ctx.B[j].center() : start[j], 0.5 * eps));
      }
    }
    const Vec goal = ctx.B[k].center();
    const auto path = router.route(start[k], goal);
    if (path.empty()) {
      throw PlanningFailure("no corridor for hole " + std::to_string(k + 1) + " at epsilon " + fmt(eps));
    }
    // One move per leg. Its support is as fat as the other cubes and the
    // boundary of S allow (capped at the leg length), so the frame ahead of
    // the cube is compressed by a bounded ratio.
    for (std::size_t i = 1; i < path.size(); ++i) {
      const Vec lo = path[i - 1].cwiseMin(path[i]);
      const Vec hi = path[i - 1].cwiseMax(path[i]);
      double margin = std::max(eps, (hi - lo).maxCoeff());
      for (const Box& ob : router.obstacles) margin = std::min(margin, linf_distance(lo, hi, ob.lo, ob.hi) - 0.5 * eps);
      for (int a = 0; a < n; ++a) margin = std::min({margin, lo[a] - ctx.gm.S.lo[a] - 0.5 * eps, ctx.gm.S.hi[a] - hi[a] - 0.5 * eps});
      margin = std::max(margin, eps);
      const Box W(lo.array() - margin, hi.array() + margin);
      Move m = build_frame_remap(W, Box::cube(path[i - 1], 0.5 * eps), Box::cube(path[i], 0.5 * eps), next_id());
      m.kind = MoveKind::corridorTranslate;
      script.push_back(std::move(m));
    }
  }

  // C: twist about the target centers
  const auto factors = quarter_turn_factors(ctx.gm.rotation);
  for (std::size_t k = 0; k < K; ++k) {
    if (ctx.skip[k] || factors.empty()) continue;
    const Vec c = ctx.B[k].center();
    const Box W = Box::cube(c, 1.5 * eps);
    const Box A = Box::cube(c, 0.5 * eps);
    for (const auto& f : factors) script.push_back(build_twist(W, A, f, ctx.twist_layers, next_id()));
  }

  // D: grow onto the target holes
  for (std::size_t k = 0; k < K; ++k) {
    if (ctx.skip[k]) continue;
    const Box W = ctx.B[k].expanded(0.45 * ctx.target_gap);
    script.push_back(build_frame_remap(W, Box::cube(ctx.B[k].center(), 0.5 * eps), ctx.B[k], next_id()));
  }
  return script;
}

}  // namespace

GeneratingMap plan_moves(const ConstructionInstance& inst, const PlanOptions& options) {
  if (!inst.materializable() || inst.hole_count() >= kMaxPlannedHoles) {
    throw PlanningFailure("explicit generating maps need fewer than 1e6 holes; this instance has " +
                          to_string(inst.hole_count()));
  }
  GeneratingMap gm;
  gm.n = inst.dim();
  gm.Q = inst.domain_box();
  gm.S = inst.target_box();
  gm.T = inst.exterior();
  gm.product = inst.product;
  const std::size_t K = static_cast<std::size_t>(inst.hole_count());
  const AffineMap Tinv = gm.T.inverse();

  PlanContext ctx{inst, gm, {}, {}, std::vector<bool>(K, false), 0.0, 0.0, options.twist_layers};
  for (std::size_t k = 0; k < K; ++k) {
    gm.hole_maps.push_back(inst.product.map(k));
    gm.target_maps.push_back(inst.target.map(k));
    const AffineMap alpha = compose(AffineMap::from(gm.target_maps[k]),
                                    compose(gm.T, AffineMap::from(gm.hole_maps[k].inverse())));
    gm.prescribed.push_back(alpha);
    const Box H = gm.hole_box(k);
    ctx.A.emplace_back(gm.T.apply(H.lo), gm.T.apply(H.hi));
    ctx.B.push_back(gm.target_hole_box(k));
  }

  // linear part of alpha o T^-1, common to every hole: P times a positive diagonal
  const Mat lambda = gm.prescribed.front().linear * Tinv.linear;
  Mat pattern = Mat::Zero(gm.n, gm.n);
  for (int i = 0; i < gm.n; ++i) {
    for (int j = 0; j < gm.n; ++j) {
      if (std::abs(lambda(i, j)) > 1e-12 * lambda.norm()) pattern(i, j) = lambda(i, j) > 0 ? 1 : -1;
    }
  }
  gm.rotation = SignedPermutation::from_matrix(pattern);
  if (gm.rotation.determinant() != 1) throw PlanningFailure("hole maps reverse orientation");

  for (std::size_t k = 0; k < K; ++k) {
    const bool same_box = (ctx.A[k].lo - ctx.B[k].lo).norm() <= 1e-12 * gm.S.diameter() &&
                          (ctx.A[k].hi - ctx.B[k].hi).norm() <= 1e-12 * gm.S.diameter();
    ctx.skip[k] = same_box && gm.rotation.is_identity();
  }

  ctx.domain_gap = min_free_gap(ctx.A, gm.S);
  ctx.target_gap = min_free_gap(ctx.B, gm.S);
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    if (ctx.skip[k]) continue;
    eps = std::min({eps, ctx.A[k].min_extent(), ctx.B[k].min_extent()});
  }
  eps *= options.epsilon_factor;
  const double floor = options.epsilon_floor * ctx.domain_gap;
  // The grow frames are 0.45 x target gap thick; below the floor they are
  // unresolvable at the scale of the domain.
  if (ctx.target_gap < floor) {
    throw PlanningFailure("target gap " + fmt(ctx.target_gap) + " is below " + fmt(options.epsilon_floor) +
                          " x min domain gap (" + fmt(floor) + ")");
  }
  std::string last_error;
  for (; eps >= floor; eps *= 0.5) {
    try {
      gm.script = plan_with_epsilon(ctx, eps);
      gm.epsilon = eps;
      return gm;
    } catch (const PlanningFailure& e) {
      last_error = e.what();
    } catch (const MoveValidationFailure& e) {
      last_error = e.what();
    }
  }
  throw PlanningFailure("epsilon fell below " + fmt(options.epsilon_floor) + " x min domain gap (" +
                        fmt(floor) + "); target gap " + fmt(ctx.target_gap) + ", domain gap " +
                        fmt(ctx.domain_gap) + (last_error.empty() ? "" : "; last error: " + last_error));
}

// ---------------------------------------------------------------------------

PhiEvaluator::PhiEvaluator(const GeneratingMap& gm) : gm_(&gm), hints_(gm.script.size(), 0) {}

PhiEvaluator::Result PhiEvaluator::eval(const Vec& x, bool with_trace) {
  if (gm_->Q.contains_closed(x)) {
    // points within rounding of a hole boundary count as boundary points
    if (const auto k = gm_->product.locate(x, true, 1e-12 * gm_->Q.diameter())) {
      throw PointInHole(*k, "point lies inside hole " + std::to_string(*k + 1));
    }
  }
  return eval_unchecked(x, with_trace);
}

PhiEvaluator::Result PhiEvaluator::eval_unchecked(const Vec& x, bool with_trace) {
  Result r;
  r.jacobian = gm_->T.linear;
  r.point = gm_->T.apply(x);
  if (!gm_->Q.contains_closed(x)) return r;
  for (std::size_t m = 0; m < gm_->script.size(); ++m) {
    long used = -2;
    r.point = gm_->script[m].apply(r.point, hints_[m], &r.jacobian, &used);
    if (with_trace && used != -2) r.trace.emplace_back(m, used);
  }
  return r;
}

PhiEvaluator::Result evaluate_phi(const GeneratingMap& gm, const Vec& x) {
  PhiEvaluator ev(gm);
  return ev.eval(x);
}

double condition_number(const Mat& J) {
  Eigen::JacobiSVD<Mat> svd(J);
  const auto& s = svd.singularValues();
  return s.maxCoeff() / s.minCoeff();
}

Vec sample_box_boundary(const Box& b, std::uint64_t seed, std::uint64_t index) {
  const int n = b.dim();
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = uniform01(seed, index, static_cast<std::uint64_t>(i));
  const auto face = static_cast<int>(uniform01(seed, index, static_cast<std::uint64_t>(n)) * 2 * n);
  u[face / 2] = (face % 2 == 0) ? 0.0 : 1.0;
  return b.at(u);
}

Vec sample_shell(const GeneratingMap& gm, std::uint64_t seed, std::uint64_t index) {
  const int n = gm.n;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Vec u(n);
    for (int i = 0; i < n; ++i) {
      u[i] = uniform01(seed, index, attempt * static_cast<std::uint64_t>(n + 1) + static_cast<std::uint64_t>(i));
    }
    const Vec x = gm.Q.at(u);
    if (!gm.product.locate(x, false)) return x;
  }
}

ValidationReport validate_generating_map(const GeneratingMap& gm, const GenmapValidationOptions& opt) {
  ValidationReport rep;
  auto add = [&](std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  const double tol = 1e-10 * gm.S.diameter();
  PhiEvaluator ev(gm);

  // per-move validation
  {
    std::string detail = std::to_string(gm.script.size()) + " moves";
    bool ok = true;
    for (std::size_t m = 0; m < gm.script.size() && ok; ++m) {
      try {
        validate_move(gm.script[m], m);
      } catch (const MoveValidationFailure& e) {
        ok = false;
        detail = e.what();
      }
    }
    add("moves validate", ok, detail);
  }

  // orientation audit: every cell, then jacobians along random evaluations
  {
    bool ok = true;
    std::string detail;
    for (std::size_t m = 0; m < gm.script.size() && ok; ++m) {
      for (std::size_t c = 0; c < gm.script[m].cells.size(); ++c) {
        if (!(gm.script[m].cells[c].linear.determinant() > 0.0)) {
          ok = false;
          detail = "move " + std::to_string(m) + " simplex " + std::to_string(c) +
                   " has non-positive determinant";
          break;
        }
      }
    }
    double min_det = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < opt.orientation_samples && ok; ++i) {
      const Vec x = sample_shell(gm, opt.seed + 1, i);
      try {
        const double det = ev.eval(x).jacobian.determinant();
        min_det = std::min(min_det, det);
        if (!(det > 0.0)) {
          ok = false;
          detail = "non-positive jacobian determinant at sample " + std::to_string(i);
        }
      } catch (const Error& e) {
        ok = false;
        detail = e.what();
      }
    }
    if (ok) detail = "min sampled jacobian determinant " + fmt(min_det);
    add("orientation audit", ok, detail);
  }

  // boundary of Q maps by T
  {
    double worst = 0.0;
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < opt.boundary_samples; ++i) {
      const Vec y = sample_box_boundary(gm.Q, opt.seed + 2, i);
      try {
        worst = std::max(worst, (ev.eval(y).point - gm.T.apply(y)).norm());
      } catch (const Error& e) {
        ok = false;
        detail = e.what();
      }
    }
    ok = ok && worst <= tol;
    add("boundary of Q maps by T", ok, detail.empty() ? "max deviation " + fmt(worst) : detail);
  }

  // hole boundaries follow the prescribed affine maps; conjugacy on the boundary of Q
  {
    double worst = 0.0;
    double worst_conj = 0.0;
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < gm.hole_count() && ok; ++k) {
      const Box H = gm.hole_box(k);
      for (std::size_t i = 0; i < opt.boundary_samples; ++i) {
        try {
          const Vec x = sample_box_boundary(H, opt.seed + 3 + k, i);
          worst = std::max(worst, (ev.eval(x).point - gm.prescribed[k].apply(x)).norm());
          const Vec y = sample_box_boundary(gm.Q, opt.seed + 2, i);
          const Vec lhs = ev.eval(gm.hole_maps[k].apply(y)).point;
          const Vec rhs = gm.target_maps[k].apply(ev.eval(y).point);
          worst_conj = std::max(worst_conj, (lhs - rhs).norm());
        } catch (const Error& e) {
          ok = false;
          detail = "hole " + std::to_string(k + 1) + ": " + e.what();
          break;
        }
      }
    }
    add("hole boundaries follow the prescribed maps", ok && worst <= tol,
        detail.empty() ? "max deviation " + fmt(worst) : detail);
    add("boundary conjugacy phi(h_k(y)) = g_k(phi(y))", ok && worst_conj <= tol,
        detail.empty() ? "max deviation " + fmt(worst_conj) : detail);
  }

  // injectivity on random pairs, half of them close together
  {
    bool ok = true;
    std::string detail;
    const double close = 1e-6 * gm.Q.diameter();
    std::size_t checked = 0;
    for (std::size_t i = 0; i < opt.injectivity_pairs && ok; ++i) {
      const Vec x = sample_shell(gm, opt.seed + 4, i);
      Vec x2;
      if (i % 2 == 0) {
        x2 = sample_shell(gm, opt.seed + 5, i);
      } else {
        Vec dir(gm.n);
        for (int j = 0; j < gm.n; ++j) dir[j] = uniform01(opt.seed + 6, i, j) - 0.5;
        x2 = x + close * dir.normalized();
        if (!gm.Q.contains_closed(x2) || gm.product.locate(x2, false)) continue;
      }
      if (x == x2) continue;
      try {
        if (!((ev.eval(x).point - ev.eval(x2).point).norm() > 0.0)) {
          ok = false;
          detail = "pair " + std::to_string(i) + " maps to one point";
        }
        ++checked;
      } catch (const Error& e) {
        ok = false;
        detail = e.what();
      }
    }
    add("injectivity spot check", ok, ok ? std::to_string(checked) + " pairs" : detail);
  }

  // support locality
  {
    bool ok = true;
    std::string detail;
    for (std::size_t m = 0; m < gm.script.size() && ok; ++m) {
      const Move& mv = gm.script[m];
      const Box band = mv.support.expanded(0.5 * mv.support.min_extent());
      std::size_t hint = 0;
      for (std::uint64_t i = 0; i < 64; ++i) {
        Vec u(gm.n);
        for (int j = 0; j < gm.n; ++j) u[j] = uniform01(opt.seed + 7, m * 64 + i, j);
        const Vec x = band.at(u);
        if (mv.support.contains_open(x)) continue;
        if (!(mv.apply(x, hint) == x)) {
          ok = false;
          detail = "move " + std::to_string(m) + " moves a point outside its support";
          break;
        }
      }
    }
    add("moves are local to their supports", ok, detail);
  }
  return rep;
}

}  // namespace qce
