#pragma once

// Persistence: instance and construction files (JSON, schemaVersion 1),
// the binary sidecar for large move scripts, CSV point clouds, SVG figures
// and verification reports. Readers throw FormatError on anything malformed.

#include "qce/genmap.hpp"
#include "qce/ifs.hpp"
#include "qce/params.hpp"
#include "qce/verify.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qce {

inline constexpr int kSchemaVersion = 1;

/// Scripts with more cell coordinates than this go to the sidecar.
inline constexpr std::size_t kInlineCellReals = 20000;

nlohmann::json params_to_json(const InstanceParams& params);

/// Re-derives the instance from its stored inputs (paper: n, p, alpha, beta;
/// direct: n, p, d, M, M', t) and checks the stored derived values against
/// it. InfeasibleParams propagates; any mismatch is a FormatError.
InstanceParams params_from_json(const nlohmann::json& j);

nlohmann::json generating_map_to_json(const GeneratingMap& gm, std::vector<double>* sidecar);
GeneratingMap generating_map_from_json(const nlohmann::json& j, const ConstructionInstance& inst,
                                       const std::vector<double>* sidecar);

struct Construction {
  ConstructionInstance instance;
  std::optional<GeneratingMap> genmap;
  std::string genmap_status;  // "built", or why it was skipped
};

/// Writes path and, when the script is large, path with extension
/// ".cells.bin" (little-endian binary64, row-major vertex coordinates).
void write_construction(const std::filesystem::path& path, const Construction& c);
Construction read_construction(const std::filesystem::path& path);

/// Either file kind: an instance file is built on the fly (with its
/// generating map when the instance is small and planar).
Construction load_construction_or_instance(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty JSON, 2-space indent, trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json report_to_json(const VerifyReport& report);
/// Human-readable summary of a stored report.
std::string format_report(const nlohmann::json& report);

/// Header x1..xn, one point per row, 17 significant digits.
void write_cloud_csv(std::ostream& out, const std::vector<Vec>& cloud);

/// Planar figure of the target box S: target holes of every level up to
/// depth (class "hole", data-level attribute) and the fiber points (at most
/// 1e4, evenly thinned). Deterministic output.
std::string render_svg(const ConstructionInstance& inst, int depth, const std::vector<Vec>& fiber_points);

}  // namespace qce
