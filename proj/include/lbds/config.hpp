#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbds/presets.hpp"

namespace lbds {

enum class StateKind { none, levy, reflected };
enum class SolveMethod { picard, yosida };

struct NumericsConfig {
  double theta = 8.0;
  double mu = 1.0;
  double epsilon = 1e-6;
  std::vector<double> deltas{1.0, 0.5, 0.25, 0.125};
  double picard_tol = 1e-6;
  std::size_t picard_max_iters = 30;
  int degree = 2;
  SolveMethod method = SolveMethod::picard;
};

struct PdeConfig {
  std::vector<double> t{0.0, 0.25, 0.5};
  std::vector<double> x{0.1, 0.5, 0.9};
  std::size_t paths = 20000;
  std::size_t steps = 100;
  std::size_t fd_cells = 800;
  std::size_t fd_steps = 800;
  double scheme_tol = 0.03;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  bool csv = true;
  bool json = true;
  std::size_t max_csv_paths = 200;
};

/// Parsed experiment. Every field has been range-checked; the characteristics
/// and the domain are fully validated.
struct ExperimentConfig {
  std::string canonical;  // sorted-key JSON of the input
  std::uint64_t hash = 0;  // FNV-1a of canonical
  std::uint64_t seed = 0;
  std::optional<LevyCharacteristics> chars;
  double t0 = 0.0, T = 1.0;
  std::size_t steps = 100;
  std::size_t paths = 1000;
  std::size_t backward_groups = 0;
  ProblemSpec problem;
  StateKind state = StateKind::levy;
  std::vector<double> x0{0.5};
  AffineSigma sigma;
  DomainSpec domain;
  NumericsConfig numerics;
  PdeConfig pde;
  OutputConfig outputs;

  const LevyCharacteristics& characteristics() const { return *chars; }
  TimeGrid grid() const { return TimeGrid::uniform(t0, T, steps); }
  SolverConfig solver() const;
};

/// Throws InvalidArgument on malformed text, unknown keys, unknown presets,
/// a missing seed or out-of-range values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace lbds
