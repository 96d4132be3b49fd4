#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbds/config.hpp"

namespace lbds {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  nlohmann::json metrics;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Configuration replayed by the reproducibility criterion; a small
  /// built-in experiment is used when null.
  const ExperimentConfig* config = nullptr;
  std::vector<int> criteria;  // empty: all
  std::filesystem::path scratch = std::filesystem::temp_directory_path() / "lbds-verify";
};

constexpr int kCriteria = 12;

/// Runs one criterion. Exceptions raised by the numerics count as failures.
CriterionResult verify_criterion(int id, const VerifyOptions& options);

/// Runs the selected criteria in order, printing one table row per criterion
/// to `progress` when given.
std::vector<CriterionResult> run_verification(const VerifyOptions& options, std::ostream* progress = nullptr);

std::string format_row(const CriterionResult& r);

}  // namespace lbds
