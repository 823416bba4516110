#pragma once

// The invariant suites behind `qce verify`: every hard check of the params,
// ifs, genmap, elevator and analysis modules, run against one construction.
// Hard checks decide the exit status; soft checks only warn.

#include "qce/genmap.hpp"
#include "qce/ifs.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qce {

struct VerifyCheck {
  std::string suite;
  std::string name;
  bool passed = false;
  bool hard = true;
  std::string detail;
};

struct VerifyOptions {
  std::string fiber = "1|1";               // fiber line for the cloud checks
  std::size_t cloud_depth = 8;             // capped so that M'^depth <= 1e6
  std::size_t conjugacy_per_depth = 300;   // per cylinder depth 0..6
  std::size_t invariant_points = 200;
  std::size_t qc_points = 1000;
  std::size_t sobolev_samples = 20000;
  GenmapValidationOptions genmap;
  std::uint64_t seed = 0x5EED;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  /// Computed quantities in a fixed order (dims, kappa, bounds, q, energy).
  std::vector<std::pair<std::string, double>> numbers;
  std::vector<std::string> notes;

  bool hard_passed() const;
  std::size_t warnings() const;
};

/// Runs every suite that applies: generating-map suites need gm; paper-mode
/// instances get the symbolic suites only. Never throws for a failed check.
VerifyReport run_verify(const ConstructionInstance& inst, const GeneratingMap* gm,
                        const VerifyOptions& options = {});

}  // namespace qce
