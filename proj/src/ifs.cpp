#include "qce/ifs.hpp"

#include "qce/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qce {

namespace {

long double to_ld(BigCount k) { return static_cast<long double>(k); }

std::string fmt(long double v) {
  std::ostringstream os;
  os.precision(12);
  os << static_cast<double>(v);
  return os.str();
}

Vec to_vec(const std::vector<long double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = static_cast<double>(v[i]);
  return out;
}

}  // namespace

std::string to_string(BigCount value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  return {digits.rbegin(), digits.rend()};
}

BigCount parse_big_count(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty count");
  BigCount v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw std::invalid_argument("bad count: " + text);
    v = v * 10 + static_cast<BigCount>(c - '0');
  }
  return v;
}

// ---------------------------------------------------------------------------

PackedSystem build_rect_packing(int n, long double ratio, BigCount K) {
  if (n < 1) throw InfeasibleParams("n >= 1", "n = " + std::to_string(n));
  if (!(ratio > 0.0L && ratio < 1.0L)) throw InfeasibleParams("0 < r < 1", "r = " + fmt(ratio));
  if (K < 1) throw InfeasibleParams("K >= 1", "K = 0");

  const long double lnK = std::log(to_ld(K));
  const long double lnr = std::log(ratio);
  if (!(lnK < -n * lnr)) {
    throw InfeasibleParams("K < r^-n", "K = " + to_string(K) + ", r^-n = " + fmt(std::exp(-n * lnr)));
  }

  PackedSystem s;
  s.n = n;
  s.ratio = ratio;
  s.count = K;
  s.heights.resize(n);
  for (int i = 0; i < n; ++i) {
    s.heights[i] = std::exp(static_cast<long double>(n - 1 - i) / n * lnK);
  }
  s.heights[n - 1] = 1.0L;

  // 1/r^n = a_n/r^n > a_{n-1}/r^{n-1} > ... > a_1/r > K, checked on logs
  long double prev = -n * lnr;
  for (int i = n - 1; i >= 0; --i) {
    const long double term = std::log(s.heights[i]) - (i + 1) * lnr;
    if (i < n - 1 && !(term < prev)) {
      throw InfeasibleParams("height chain", "a_" + std::to_string(i + 1) + " breaks the chain");
    }
    prev = term;
  }
  if (!(prev > lnK)) throw InfeasibleParams("height chain", "a_1/r <= K");

  std::vector<int> perm(n), signs(n, 1);
  perm[0] = n - 1;
  for (int j = 1; j < n; ++j) perm[j] = j - 1;
  s.rot = SignedPermutation(perm, signs);
  if (s.rot.determinant() < 0) {
    signs[0] = -1;
    s.rot = SignedPermutation(perm, signs);
  }

  s.image_extents.resize(n);
  s.rot_lo.resize(n);
  for (int i = 0; i < n; ++i) {
    s.image_extents[i] = ratio * s.heights[perm[i]];
    s.rot_lo[i] = signs[i] > 0 ? 0.0L : -ratio * s.heights[perm[i]];
  }
  s.gap = (s.heights[0] - to_ld(K) * s.image_extents[0]) / (to_ld(K) + 1.0L);
  s.offsets.assign(n, 0.0L);
  for (int j = 1; j < n; ++j) s.offsets[j] = 0.5L * (s.heights[j] - s.image_extents[j]);
  if (!(s.gap > 0.0L)) throw InfeasibleParams("K < r^-n", "non-positive first-axis gap");
  return s;
}

Box PackedSystem::domain_box() const { return Box(Vec::Zero(n), to_vec(heights)); }

std::uint64_t PackedSystem::size() const {
  if (count > std::numeric_limits<std::uint64_t>::max()) {
    throw std::overflow_error("branch count exceeds 64 bits: " + to_string(count));
  }
  return static_cast<std::uint64_t>(count);
}

std::vector<long double> PackedSystem::image_lo(BigCount k) const {
  std::vector<long double> lo = offsets;
  lo[0] = gap + to_ld(k) * (image_extents[0] + gap);
  return lo;
}

Box PackedSystem::image_box(std::uint64_t k) const {
  const auto lo = image_lo(k);
  std::vector<long double> hi(n);
  for (int i = 0; i < n; ++i) hi[i] = lo[i] + image_extents[i];
  return Box(to_vec(lo), to_vec(hi));
}

Similarity PackedSystem::map(BigCount k) const {
  const auto lo = image_lo(k);
  Vec shift(n);
  for (int i = 0; i < n; ++i) shift[i] = static_cast<double>(lo[i] - rot_lo[i]);
  return Similarity{static_cast<double>(ratio), rot, shift};
}

std::optional<std::uint64_t> PackedSystem::locate(const Vec& x, bool strict, double tol) const {
  for (int j = 1; j < n; ++j) {
    const double lo = static_cast<double>(offsets[j]);
    const double hi = static_cast<double>(offsets[j] + image_extents[j]);
    if (strict ? !(x[j] > lo + tol && x[j] < hi - tol) : (x[j] < lo - tol || x[j] > hi + tol)) {
      return std::nullopt;
    }
  }
  const long double pitch = image_extents[0] + gap;
  const long double u = (static_cast<long double>(x[0]) - gap) / pitch;
  const long double base = std::floor(u);
  for (long double cand = base - 1; cand <= base + 1; cand += 1) {
    if (cand < 0 || cand >= to_ld(count)) continue;
    const long double lo = gap + cand * pitch;
    const long double hi = lo + image_extents[0];
    const long double xv = x[0];
    const bool inside = strict ? (xv > lo + tol && xv < hi - tol) : (xv >= lo - tol && xv <= hi + tol);
    if (inside) return static_cast<std::uint64_t>(cand);
  }
  return std::nullopt;
}

SeparationCert PackedSystem::certificate() const {
  long double boundary = gap;
  for (int j = 1; j < n; ++j) boundary = std::min(boundary, offsets[j]);
  SeparationCert c;
  c.boundary_distance = static_cast<double>(boundary);
  c.margin = 0.5 * c.boundary_distance;
  c.pairwise_gap = count >= 2 ? static_cast<double>(gap) : std::numeric_limits<double>::infinity();
  return c;
}

ExplicitSystem materialize(const PackedSystem& sys) {
  ExplicitSystem e{sys.domain_box(), {}};
  const std::uint64_t k = sys.size();
  e.maps.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) e.maps.push_back(sys.map(i));
  return e;
}

SeparationCert verify_strong_separation(const ExplicitSystem& sys) {
  const std::size_t k = sys.maps.size();
  std::vector<Box> images;
  images.reserve(k);
  SeparationCert c;
  c.boundary_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    images.push_back(sys.maps[i].image(sys.domain));
    const double m = boundary_margin(images.back(), sys.domain);
    if (!(m > 0.0)) {
      throw SeparationViolation(SeparationViolation::Kind::containment, i, i,
                                "image " + std::to_string(i) + " leaves the domain box");
    }
    c.boundary_distance = std::min(c.boundary_distance, m);
  }
  c.margin = 0.5 * c.boundary_distance;

  // sweep along axis 0: pairs further apart on that axis than the best gap so
  // far cannot improve it
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return images[a].lo[0] < images[b].lo[0]; });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    const Box& A = images[order[a]];
    for (std::size_t b = a + 1; b < k; ++b) {
      const Box& B = images[order[b]];
      if (B.lo[0] - A.hi[0] >= best) break;
      const double dist = box_distance(A, B);
      if (!(dist > 0.0)) {
        const auto i = std::min(order[a], order[b]);
        const auto j = std::max(order[a], order[b]);
        throw SeparationViolation(SeparationViolation::Kind::overlap, i, j,
                                  "images " + std::to_string(i) + " and " + std::to_string(j) +
                                      " have intersecting closures");
      }
      best = std::min(best, dist);
    }
  }
  c.pairwise_gap = best;
  return c;
}

SeparationCert verify_strong_separation(const PackedSystem& sys) {
  const SeparationCert c = sys.certificate();
  if (!(c.boundary_distance > 0.0) || !(c.pairwise_gap > 0.0)) {
    throw SeparationViolation(SeparationViolation::Kind::containment, 0, 0,
                              "packing layout has no positive margin");
  }
  if (sys.materializable()) return verify_strong_separation(materialize(sys));
  return c;
}

double similarity_dimension(BigCount count, long double ratio) {
  if (count <= 1) return 0.0;
  return static_cast<double>(std::log(to_ld(count)) / -std::log(ratio));
}

double similarity_dimension(const PackedSystem& sys) { return similarity_dimension(sys.count, sys.ratio); }

// ---------------------------------------------------------------------------

Box ProductSystem::domain_box() const {
  const Box b = base.domain_box();
  const int n = dim();
  Vec lo = Vec::Zero(n);
  Vec hi(n);
  hi.head(n - 1) = b.hi;
  hi[n - 1] = 1.0;
  return Box(lo, hi);
}

Similarity ProductSystem::map(std::uint64_t i, std::uint64_t j) const {
  const int n = dim();
  const Similarity hb = base.map(i);
  const Similarity hf = fiber.map(j);
  std::vector<int> perm(hb.rot.perm()), signs(hb.rot.signs());
  perm.push_back(n - 1);
  signs.push_back(hf.rot.signs()[0]);
  Vec shift(n);
  shift.head(n - 1) = hb.shift;
  shift[n - 1] = hf.shift[0];
  return Similarity{hb.scale, SignedPermutation(perm, signs), shift};
}

Similarity ProductSystem::map(std::uint64_t k) const {
  const std::uint64_t mp = fiber.size();
  return map(k / mp, k % mp);
}

Box ProductSystem::image_box(std::uint64_t k) const {
  const std::uint64_t mp = fiber.size();
  const Box b = base.image_box(k / mp);
  const Box f = fiber.image_box(k % mp);
  const int n = dim();
  Vec lo(n), hi(n);
  lo.head(n - 1) = b.lo;
  hi.head(n - 1) = b.hi;
  lo[n - 1] = f.lo[0];
  hi[n - 1] = f.hi[0];
  return Box(lo, hi);
}

std::optional<std::uint64_t> ProductSystem::locate(const Vec& x, bool strict, double tol) const {
  const int n = dim();
  const auto i = base.locate(x.head(n - 1), strict, tol);
  if (!i) return std::nullopt;
  const auto j = fiber.locate(x.tail(1), strict, tol);
  if (!j) return std::nullopt;
  return *i * fiber.size() + *j;
}

SeparationCert ProductSystem::certificate() const {
  const SeparationCert b = base.certificate();
  const SeparationCert f = fiber.certificate();
  SeparationCert c;
  c.boundary_distance = std::min(b.boundary_distance, f.boundary_distance);
  c.margin = 0.5 * c.boundary_distance;
  c.pairwise_gap = std::min(b.pairwise_gap, f.pairwise_gap);
  return c;
}

ExplicitSystem materialize(const ProductSystem& sys) {
  ExplicitSystem e{sys.domain_box(), {}};
  const auto total = static_cast<std::uint64_t>(sys.count());
  e.maps.reserve(total);
  for (std::uint64_t k = 0; k < total; ++k) e.maps.push_back(sys.map(k));
  return e;
}

SeparationCert verify_strong_separation(const ProductSystem& sys) {
  verify_strong_separation(sys.base);
  verify_strong_separation(sys.fiber);
  if (sys.count() <= kMaterializeLimit) return verify_strong_separation(materialize(sys));
  return sys.certificate();
}

double similarity_dimension(const ProductSystem& sys) {
  return similarity_dimension(sys.count(), sys.ratio());
}

// ---------------------------------------------------------------------------

Address Address::parse(const std::string& text) {
  Address a;
  auto parse_list = [&](const std::string& part, std::vector<std::uint64_t>& out) {
    if (part.empty()) return;
    std::stringstream ss(part);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(tok, &used);
      } catch (const std::exception&) {
        throw BadAddress("not a symbol: '" + tok + "'");
      }
      if (used != tok.size() || v == 0) throw BadAddress("symbols are 1-based integers: '" + tok + "'");
      out.push_back(v - 1);
    }
  };
  const auto bar = text.find('|');
  parse_list(text.substr(0, bar), a.prefix);
  if (bar != std::string::npos) {
    parse_list(text.substr(bar + 1), a.period);
    if (a.period.empty()) throw BadAddress("empty period after '|'");
  }
  return a;
}

Address Address::constant(std::uint64_t symbol) { return Address{{}, {symbol}}; }

std::string Address::format() const {
  std::string out;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(prefix[i] + 1);
  }
  if (!period.empty()) {
    out += '|';
    for (std::size_t i = 0; i < period.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(period[i] + 1);
    }
  }
  return out;
}

std::size_t Address::length() const {
  return infinite() ? std::numeric_limits<std::size_t>::max() : prefix.size();
}

std::uint64_t Address::at(std::size_t i) const {
  if (i < prefix.size()) return prefix[i];
  if (period.empty()) throw BadAddress("address too short: index " + std::to_string(i));
  return period[(i - prefix.size()) % period.size()];
}

std::vector<std::uint64_t> Address::truncate(std::size_t k) const {
  if (k > length()) {
    throw BadAddress("address has " + std::to_string(length()) + " symbols, need " + std::to_string(k));
  }
  std::vector<std::uint64_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = at(i);
  return out;
}

void Address::check_alphabet(BigCount alphabet) const {
  auto check = [&](std::uint64_t s) {
    if (static_cast<BigCount>(s) >= alphabet) {
      throw BadAddress("symbol " + std::to_string(s + 1) + " out of range 1.." + to_string(alphabet));
    }
  };
  for (auto s : prefix) check(s);
  for (auto s : period) check(s);
}

namespace {

template <typename System>
Similarity compose_word_impl(const System& sys, const std::vector<std::uint64_t>& word) {
  Similarity out = Similarity::identity(sys.domain_box().dim());
  for (std::uint64_t s : word) out = compose(out, sys.map(s));
  return out;
}

template <typename System>
AddressPoint point_from_address_impl(const System& sys, BigCount alphabet, long double ratio,
                                     const Address& addr, std::size_t depth) {
  const auto word = addr.truncate(depth);
  Address(word, {}).check_alphabet(alphabet);
  const Box box = sys.domain_box();
  Vec x = box.center();
  for (std::size_t i = depth; i-- > 0;) x = sys.map(word[i]).apply(x);
  const double bound = static_cast<double>(std::pow(ratio, static_cast<long double>(depth))) *
                       box.diameter();
  return {x, bound};
}

}  // namespace

Similarity compose_word(const PackedSystem& sys, const std::vector<std::uint64_t>& word) {
  return compose_word_impl(sys, word);
}

Similarity compose_word(const ProductSystem& sys, const std::vector<std::uint64_t>& word) {
  return compose_word_impl(sys, word);
}

AddressPoint point_from_address(const PackedSystem& sys, const Address& addr, std::size_t depth) {
  return point_from_address_impl(sys, sys.count, sys.ratio, addr, depth);
}

AddressPoint point_from_address(const ProductSystem& sys, const Address& addr, std::size_t depth) {
  return point_from_address_impl(sys, sys.count(), sys.ratio(), addr, depth);
}

// ---------------------------------------------------------------------------

namespace {

IndexSpotCheck spot_check(const std::string& name, const PackedSystem& sys, BigCount k) {
  IndexSpotCheck c{name, to_string(k + 1), false, ""};
  const auto lo = sys.image_lo(k);
  bool ok = lo[0] > 0.0L && lo[0] + sys.image_extents[0] < sys.heights[0];
  for (int j = 1; j < sys.n; ++j) {
    ok = ok && lo[j] > 0.0L && lo[j] + sys.image_extents[j] < sys.heights[j];
  }
  std::string detail = "image inside domain box: " + std::string(ok ? "yes" : "no");
  if (k + 1 < sys.count) {
    const auto next = sys.image_lo(k + 1);
    const long double g = next[0] - (lo[0] + sys.image_extents[0]);
    const bool gap_ok = g > 0.0L && std::abs(g - sys.gap) <= 1e-3L * sys.gap;
    ok = ok && gap_ok;
    detail += "; gap to next = " + fmt(g) + " (expected " + fmt(sys.gap) + ")";
  }
  c.passed = ok;
  c.detail = detail;
  return c;
}

}  // namespace

AffineMap ConstructionInstance::exterior() const {
  return AffineMap::box_to_box(domain_box(), target_box());
}

ConstructionInstance build_instance_systems(const InstanceParams& params) {
  ConstructionInstance inst;
  inst.params = params;
  const long double d = params.d > 0.0 ? static_cast<long double>(params.d) : std::exp(params.d_ln);
  const long double t = params.t > 0.0 ? static_cast<long double>(params.t) : std::exp(params.t_ln);
  inst.base = build_rect_packing(params.n - 1, d, params.M);
  inst.fiber = build_rect_packing(1, d, params.Mprime);
  inst.product = ProductSystem{inst.base, inst.fiber};
  inst.target = build_rect_packing(params.n, t, static_cast<BigCount>(params.M) * params.Mprime);
  inst.product_cert = verify_strong_separation(inst.product);
  inst.target_cert = verify_strong_separation(inst.target);

  if (!inst.materializable()) {
    // indices 1, 2 and M' (1-based) of every system large enough to have them
    for (const auto& [name, sys] : {std::pair<std::string, const PackedSystem*>{"base", &inst.base},
                                    {"fiber", &inst.fiber},
                                    {"target", &inst.target}}) {
      for (BigCount k : {BigCount{0}, BigCount{1}, static_cast<BigCount>(params.Mprime) - 1}) {
        if (k < sys->count) inst.spot_checks.push_back(spot_check(name, *sys, k));
      }
    }
    for (const auto& c : inst.spot_checks) {
      if (!c.passed) {
        throw SeparationViolation(SeparationViolation::Kind::overlap, 0, 0,
                                  c.system + " index " + c.index + ": " + c.detail);
      }
    }
  }
  return inst;
}

}  // namespace qce
