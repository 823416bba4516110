#include "qce/io.hpp"

#include "qce/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace qce {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// field access with FormatError instead of nlohmann exceptions

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field \"") + key + "\": " + e.what());
  }
}

void check_header(const json& j, const std::string& kind) {
  if (get<int>(j, "schemaVersion") != kSchemaVersion) {
    throw FormatError("unsupported schemaVersion " + field(j, "schemaVersion").dump());
  }
  const auto k = get<std::string>(j, "kind");
  if (k != kind) throw FormatError("expected a " + kind + " file, found \"" + k + "\"");
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j, int n) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad vector: ") + e.what());
  }
  if (static_cast<int>(v.size()) != n) throw FormatError("vector of length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  return Eigen::Map<const Vec>(v.data(), n);
}

json box_json(const Box& b) { return {{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}}; }

Box box_from(const json& j, int n) {
  Box b(vec_from(field(j, "lo"), n), vec_from(field(j, "hi"), n));
  for (int i = 0; i < n; ++i) {
    if (!(b.lo[i] < b.hi[i])) throw FormatError("empty box");
  }
  return b;
}

json rotation_json(const SignedPermutation& r) { return {{"perm", r.perm()}, {"signs", r.signs()}}; }

SignedPermutation rotation_from(const json& j, int n) {
  const auto perm = get<std::vector<int>>(j, "perm");
  const auto signs = get<std::vector<int>>(j, "signs");
  if (static_cast<int>(perm.size()) != n || static_cast<int>(signs.size()) != n) {
    throw FormatError("signed permutation of the wrong dimension");
  }
  std::vector<int> seen(n, 0);
  for (int i = 0; i < n; ++i) {
    if (perm[i] < 0 || perm[i] >= n || seen[perm[i]]++ || std::abs(signs[i]) != 1) {
      throw FormatError("not a signed permutation");
    }
  }
  return SignedPermutation(perm, signs);
}

json affine_json(const AffineMap& a) {
  std::vector<double> lin;
  for (int i = 0; i < a.linear.rows(); ++i)
    for (int k = 0; k < a.linear.cols(); ++k) lin.push_back(a.linear(i, k));
  return {{"linear", lin}, {"shift", vec_json(a.shift)}};
}

AffineMap affine_from(const json& j, int n) {
  const auto lin = get<std::vector<double>>(j, "linear");
  if (static_cast<int>(lin.size()) != n * n) throw FormatError("affine linear part of the wrong size");
  AffineMap a;
  a.linear.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) a.linear(i, k) = lin[static_cast<std::size_t>(i * n + k)];
  a.shift = vec_from(field(j, "shift"), n);
  return a;
}

json similarity_json(const Similarity& s) {
  return {{"scale", s.scale}, {"rotation", rotation_json(s.rot)}, {"shift", vec_json(s.shift)}};
}

Similarity similarity_from(const json& j, int n) {
  Similarity s;
  s.scale = get<double>(j, "scale");
  s.rot = rotation_from(field(j, "rotation"), n);
  s.shift = vec_from(field(j, "shift"), n);
  return s;
}

json cert_json(const SeparationCert& c) {
  return {{"margin", c.margin}, {"boundaryDistance", c.boundary_distance},
          {"pairwiseGap", std::isfinite(c.pairwise_gap) ? json(c.pairwise_gap) : json("inf")}};
}

json system_json(const PackedSystem& s) {
  return {{"count", to_string(s.count)}, {"ratio", static_cast<double>(s.ratio)}, {"dimension", s.n}};
}

MoveKind move_kind_from(const std::string& s) {
  for (MoveKind k : {MoveKind::frameRemap, MoveKind::corridorTranslate, MoveKind::twist}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("unknown move kind \"" + s + "\"");
}

std::uint64_t fnv1a(const std::vector<double>& reals) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : reals) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::filesystem::path sidecar_path(const std::filesystem::path& json_path) {
  std::filesystem::path p = json_path;
  p.replace_extension(".cells.bin");
  return p;
}

void write_reals(const std::filesystem::path& path, const std::vector<double>& reals) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (double v : reals) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw FormatError("cannot write " + path.string());
}

std::vector<double> read_reals(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open sidecar " + path.string());
  std::vector<double> reals(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("sidecar " + path.string() + " is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    std::memcpy(&reals[i], &bits, sizeof bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("sidecar " + path.string() + " has trailing bytes");
  return reals;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

json params_to_json(const InstanceParams& P) {
  json inputs;
  if (P.mode == ParamMode::paper) {
    inputs = {{"n", P.n}, {"p", P.p}, {"alpha", *P.alpha}, {"beta", *P.beta}};
  } else {
    inputs = {{"n", P.n}, {"p", P.p}, {"d", P.d}, {"M", P.M}, {"Mprime", P.Mprime}, {"t", P.t}};
    if (P.alpha) inputs["alpha"] = *P.alpha;
    if (P.beta) inputs["beta"] = *P.beta;
  }
  json derived = {{"d", P.d},
                  {"M", P.M},
                  {"t", P.t},
                  {"Mprime", P.Mprime},
                  {"dLn", static_cast<double>(P.d_ln)},
                  {"tLn", static_cast<double>(P.t_ln)},
                  {"betaAchieved", P.beta_achieved},
                  {"alphaAchieved", P.alpha_achieved},
                  {"q", P.q},
                  {"bounds", P.bounds}};
  return {{"schemaVersion", kSchemaVersion}, {"kind", "instance"}, {"mode", to_string(P.mode)},
          {"inputs", inputs}, {"derived", derived}, {"notes", P.notes}};
}

InstanceParams params_from_json(const json& j) {
  check_header(j, "instance");
  const auto mode = get<std::string>(j, "mode");
  const json& in = field(j, "inputs");
  InstanceParams P;
  if (mode == to_string(ParamMode::paper)) {
    P = derive_paper_params({get<int>(in, "n"), get<double>(in, "p"), get<double>(in, "alpha"), get<double>(in, "beta")});
  } else if (mode == to_string(ParamMode::direct)) {
    P = check_direct_params(get<int>(in, "n"), get<double>(in, "p"), get<double>(in, "d"),
                            get<std::uint64_t>(in, "M"), get<std::uint64_t>(in, "Mprime"), get<double>(in, "t"));
    if (in.contains("alpha")) P.alpha = get<double>(in, "alpha");
    if (in.contains("beta")) P.beta = get<double>(in, "beta");
  } else {
    throw FormatError("unknown mode \"" + mode + "\"");
  }
  const json& d = field(j, "derived");
  const bool same = get<double>(d, "d") == P.d && get<double>(d, "t") == P.t &&
                    get<std::uint64_t>(d, "M") == P.M && get<std::uint64_t>(d, "Mprime") == P.Mprime;
  if (!same) throw FormatError("stored derived values do not match the ones the inputs reproduce");
  return P;
}

// ---------------------------------------------------------------------------

json generating_map_to_json(const GeneratingMap& gm, std::vector<double>* sidecar) {
  const int n = gm.n;
  std::vector<double> reals;
  json moves = json::array();
  for (const Move& m : gm.script) {
    json rings = json::array();
    for (const Box& b : m.rings) rings.push_back(box_json(b));
    moves.push_back({{"kind", to_string(m.kind)},
                     {"support", box_json(m.support)},
                     {"innerBefore", box_json(m.inner_before)},
                     {"innerAfter", box_json(m.inner_after)},
                     {"innerRotation", rotation_json(m.inner_rotation)},
                     {"layers", m.layers},
                     {"innerMap", affine_json(m.inner_map)},
                     {"rings", rings},
                     {"cellCount", m.cells.size()},
                     {"cellOffset", reals.size()}});
    for (const AffinePiece& c : m.cells) {
      for (const auto* side : {&c.domain, &c.target})
        for (const Vec& v : *side) reals.insert(reals.end(), v.data(), v.data() + n);
    }
  }
  json holes = json::array(), targets = json::array(), prescribed = json::array();
  for (const auto& s : gm.hole_maps) holes.push_back(similarity_json(s));
  for (const auto& s : gm.target_maps) targets.push_back(similarity_json(s));
  for (const auto& a : gm.prescribed) prescribed.push_back(affine_json(a));
  json cells = {{"reals", reals.size()}, {"checksum", hex(fnv1a(reals))}};
  if (sidecar && reals.size() > kInlineCellReals) {
    cells["storage"] = "sidecar";
    *sidecar = std::move(reals);
  } else {
    cells["storage"] = "inline";
    cells["data"] = reals;
  }
  return {{"status", "built"},       {"n", n},
          {"epsilon", gm.epsilon},   {"Q", box_json(gm.Q)},
          {"S", box_json(gm.S)},     {"T", affine_json(gm.T)},
          {"rotation", rotation_json(gm.rotation)},
          {"holeMaps", holes},       {"targetMaps", targets},
          {"prescribed", prescribed}, {"notes", gm.notes},
          {"moves", moves},          {"cells", cells}};
}

GeneratingMap generating_map_from_json(const json& j, const ConstructionInstance& inst,
                                       const std::vector<double>* sidecar) {
  GeneratingMap gm;
  gm.n = get<int>(j, "n");
  if (gm.n != inst.dim()) throw FormatError("generating map dimension differs from the instance");
  const int n = gm.n;
  gm.epsilon = get<double>(j, "epsilon");
  gm.Q = box_from(field(j, "Q"), n);
  gm.S = box_from(field(j, "S"), n);
  gm.T = affine_from(field(j, "T"), n);
  gm.rotation = rotation_from(field(j, "rotation"), n);
  gm.product = inst.product;
  for (const auto& s : field(j, "holeMaps")) gm.hole_maps.push_back(similarity_from(s, n));
  for (const auto& s : field(j, "targetMaps")) gm.target_maps.push_back(similarity_from(s, n));
  for (const auto& a : field(j, "prescribed")) gm.prescribed.push_back(affine_from(a, n));
  gm.notes = get<std::vector<std::string>>(j, "notes");
  const auto K = static_cast<std::size_t>(inst.hole_count());
  if (gm.hole_maps.size() != K || gm.target_maps.size() != K || gm.prescribed.size() != K) {
    throw FormatError("generating map does not have one hole map per hole");
  }

  const json& cells = field(j, "cells");
  const auto count = get<std::size_t>(cells, "reals");
  std::vector<double> inline_reals;
  const std::vector<double>* reals = nullptr;
  const auto storage = get<std::string>(cells, "storage");
  if (storage == "inline") {
    inline_reals = get<std::vector<double>>(cells, "data");
    reals = &inline_reals;
  } else if (storage == "sidecar") {
    if (!sidecar) throw FormatError("cell coordinates are in a sidecar that was not supplied");
    reals = sidecar;
  } else {
    throw FormatError("unknown cell storage \"" + storage + "\"");
  }
  if (reals->size() != count) throw FormatError("cell coordinate count mismatch");
  if (hex(fnv1a(*reals)) != get<std::string>(cells, "checksum")) throw FormatError("cell coordinate checksum mismatch");

  const std::size_t per_cell = 2 * static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(n);
  for (const auto& jm : field(j, "moves")) {
    Move m;
    m.kind = move_kind_from(get<std::string>(jm, "kind"));
    m.support = box_from(field(jm, "support"), n);
    m.inner_before = box_from(field(jm, "innerBefore"), n);
    m.inner_after = box_from(field(jm, "innerAfter"), n);
    m.inner_rotation = rotation_from(field(jm, "innerRotation"), n);
    m.layers = get<int>(jm, "layers");
    m.inner_map = affine_from(field(jm, "innerMap"), n);
    for (const auto& b : field(jm, "rings")) m.rings.push_back(box_from(b, n));
    const auto cell_count = get<std::size_t>(jm, "cellCount");
    const auto offset = get<std::size_t>(jm, "cellOffset");
    if (offset > count || cell_count > (count - offset) / per_cell) throw FormatError("cell range out of bounds");
    m.cells.reserve(cell_count);
    const double* p = reals->data() + offset;
    for (std::size_t c = 0; c < cell_count; ++c) {
      std::vector<Vec> dom(n + 1), tar(n + 1);
      for (auto* side : {&dom, &tar}) {
        for (Vec& v : *side) {
          v = Eigen::Map<const Vec>(p, n);
          p += n;
        }
      }
      m.cells.emplace_back(std::move(dom), std::move(tar));
    }
    gm.script.push_back(std::move(m));
  }
  return gm;
}

// ---------------------------------------------------------------------------

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("cannot write " + path.string());
}

void write_construction(const std::filesystem::path& path, const Construction& c) {
  const auto& inst = c.instance;
  json j = {{"schemaVersion", kSchemaVersion},
            {"kind", "construction"},
            {"instance", params_to_json(inst.params)},
            {"systems", {{"base", system_json(inst.base)}, {"fiber", system_json(inst.fiber)},
                         {"target", system_json(inst.target)}}},
            {"certificates", {{"product", cert_json(inst.product_cert)}, {"target", cert_json(inst.target_cert)}}}};
  std::vector<double> sidecar;
  const auto side = sidecar_path(path);
  if (c.genmap) {
    j["genmap"] = generating_map_to_json(*c.genmap, &sidecar);
    if (!sidecar.empty()) j["genmap"]["cells"]["file"] = side.filename().string();
  } else {
    j["genmap"] = {{"status", c.genmap_status}};
  }
  write_json_file(path, j);
  if (!sidecar.empty()) write_reals(side, sidecar);
}

Construction read_construction(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  check_header(j, "construction");
  Construction c;
  c.instance = build_instance_systems(params_from_json(field(j, "instance")));
  const json& certs = field(j, "certificates");
  if (get<double>(field(certs, "product"), "margin") != c.instance.product_cert.margin ||
      get<double>(field(certs, "target"), "margin") != c.instance.target_cert.margin) {
    throw FormatError("stored separation certificates do not match the rebuilt systems");
  }
  const json& g = field(j, "genmap");
  c.genmap_status = get<std::string>(g, "status");
  if (c.genmap_status == "built") {
    const json& cells = field(g, "cells");
    std::vector<double> sidecar;
    if (get<std::string>(cells, "storage") == "sidecar") {
      const auto file = get<std::string>(cells, "file");
      if (file.find('/') != std::string::npos || file.find('\\') != std::string::npos) {
        throw FormatError("sidecar name must be a plain file name");
      }
      sidecar = read_reals(path.parent_path() / file, get<std::size_t>(cells, "reals"));
    }
    c.genmap = generating_map_from_json(g, c.instance, &sidecar);
  }
  return c;
}

Construction load_construction_or_instance(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  const auto kind = get<std::string>(j, "kind");
  if (kind == "construction") return read_construction(path);
  Construction c;
  c.instance = build_instance_systems(params_from_json(j));
  if (c.instance.params.mode == ParamMode::paper) {
    c.genmap_status = "skipped (paper-mode magnitude)";
  } else if (c.instance.dim() != 2) {
    c.genmap_status = "skipped (planar instances only)";
  } else {
    c.genmap = plan_moves(c.instance);
    c.genmap_status = "built";
  }
  return c;
}

// ---------------------------------------------------------------------------

json report_to_json(const VerifyReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"suite", c.suite}, {"name", c.name}, {"passed", c.passed},
                      {"hard", c.hard}, {"detail", c.detail}});
  }
  json numbers = json::object();
  for (const auto& [k, v] : rep.numbers) numbers[k] = std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "nan");
  return {{"schemaVersion", kSchemaVersion}, {"kind", "report"},
          {"passed", rep.hard_passed()},     {"warnings", rep.warnings()},
          {"checks", checks},                {"numbers", numbers},
          {"notes", rep.notes}};
}

std::string format_report(const json& j) {
  check_header(j, "report");
  std::ostringstream os;
  std::size_t hard_failed = 0;
  for (const auto& c : field(j, "checks")) {
    const bool passed = get<bool>(c, "passed");
    const bool hard = get<bool>(c, "hard");
    if (!passed && hard) ++hard_failed;
    os << (passed ? "PASS" : hard ? "FAIL" : "WARN") << "  [" << get<std::string>(c, "suite") << "] "
       << get<std::string>(c, "name");
    const auto detail = get<std::string>(c, "detail");
    if (!detail.empty()) os << ": " << detail;
    os << '\n';
  }
  os << '\n';
  for (const auto& [k, v] : field(j, "numbers").items()) {
    os << "  " << std::left << std::setw(28) << k << ' ' << (v.is_number() ? fmt(v.get<double>(), 12) : v.dump()) << '\n';
  }
  for (const auto& note : field(j, "notes")) os << "note: " << note.get<std::string>() << '\n';
  os << '\n' << (hard_failed == 0 ? "all hard checks pass" : std::to_string(hard_failed) + " hard check(s) failed")
     << ", " << get<std::size_t>(j, "warnings") << " warning(s)\n";
  return os.str();
}

void write_cloud_csv(std::ostream& out, const std::vector<Vec>& cloud) {
  const int n = cloud.empty() ? 0 : static_cast<int>(cloud.front().size());
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << (i + 1);
  out << '\n';
  char buf[32];
  for (const Vec& p : cloud) {
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

std::string render_svg(const ConstructionInstance& inst, int depth, const std::vector<Vec>& fiber_points) {
  if (inst.dim() != 2) throw std::invalid_argument("render needs a planar instance");
  if (!inst.materializable()) throw BudgetExceeded("render needs an instance with explicit target maps");
  if (depth < 0) throw std::invalid_argument("render depth must be >= 0");
  const std::uint64_t K = inst.target.size();
  std::uint64_t total = 0, level = 1;
  for (int l = 1; l <= depth; ++l) {
    if (level > 200'000 / K) throw BudgetExceeded("render depth " + std::to_string(depth) + " exceeds 2e5 rectangles");
    level *= K;
    total += level;
  }
  const Box S = inst.target_box();
  const double width = 1000.0;
  const double scale = width / S.extent(0);
  const double height = S.extent(1) * scale;
  char buf[256];
  std::ostringstream os;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.3f\" height=\"%.3f\" viewBox=\"0 0 %.3f %.3f\">\n",
                width, height, width, height);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n" << buf;
  os << "<!-- schemaVersion 1 -->\n";
  os << "<style>.frame{fill:none;stroke:#000;stroke-width:1}.hole{fill-opacity:0.25;stroke:#333;stroke-width:0.3}"
        ".fiber{fill:#c0392b}</style>\n";
  auto rect = [&](const Box& b, const char* cls, int lvl) {
    const double x = (b.lo[0] - S.lo[0]) * scale;
    const double y = (S.hi[1] - b.hi[1]) * scale;
    if (lvl > 0) {
      std::snprintf(buf, sizeof buf,
                    "<rect class=\"%s\" data-level=\"%d\" x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\"/>\n", cls,
                    lvl, x, y, b.extent(0) * scale, b.extent(1) * scale);
    } else {
      std::snprintf(buf, sizeof buf, "<rect class=\"%s\" x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\"/>\n", cls,
                    x, y, b.extent(0) * scale, b.extent(1) * scale);
    }
    os << buf;
  };
  rect(S, "frame", 0);
  const char* fills[] = {"#2e86c1", "#28b463", "#d68910", "#7d3c98"};
  std::vector<Similarity> words{Similarity::identity(2)};
  for (int l = 1; l <= depth; ++l) {
    std::snprintf(buf, sizeof buf, "<g fill=\"%s\">\n", fills[(l - 1) % 4]);
    os << buf;
    std::vector<Similarity> next;
    next.reserve(words.size() * K);
    for (const auto& w : words) {
      for (std::uint64_t k = 0; k < K; ++k) {
        next.push_back(compose(w, inst.target.map(k)));
        rect(next.back().image(S), "hole", l);
      }
    }
    os << "</g>\n";
    words = std::move(next);
  }
  constexpr std::size_t kMaxPoints = 10000;
  const std::size_t stride = std::max<std::size_t>(1, (fiber_points.size() + kMaxPoints - 1) / kMaxPoints);
  if (!fiber_points.empty()) {
    os << "<g class=\"fiber\">\n";
    for (std::size_t i = 0; i < fiber_points.size(); i += stride) {
      const Vec& p = fiber_points[i];
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"0.8\"/>\n", (p[0] - S.lo[0]) * scale,
                    (S.hi[1] - p[1]) * scale);
      os << buf;
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  (void)total;
  return os.str();
}

}  // namespace qce
