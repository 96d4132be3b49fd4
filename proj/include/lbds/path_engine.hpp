#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lbds/levy_model.hpp"
#include "lbds/martingale_basis.hpp"

namespace lbds {

/// Strictly increasing time nodes t0 = tau_0 < ... < tau_N = T.
class TimeGrid {
 public:
  static TimeGrid uniform(double t0, double t_end, std::size_t n_steps);
  explicit TimeGrid(std::vector<double> nodes);

  std::size_t steps() const { return nodes_.size() - 1; }
  std::span<const double> nodes() const { return nodes_; }
  double node(std::size_t i) const { return nodes_[i]; }
  double dt(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
  double start() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }
  /// Index of the node equal to t (within 1e-9 relative); throws otherwise.
  std::size_t index_of(double t) const;

 private:
  std::vector<double> nodes_;
};

/// Deterministic per-interval integrals shared by every path of a batch.
struct GridIntegrals {
  std::size_t n_steps = 0;
  std::size_t n_atoms = 0;
  std::size_t dim = 0;
  std::vector<double> atom_size;      // n_atoms
  std::vector<double> continuous_drift;  // int (b - sum_{|e|<=1} e lambda) ds
  std::vector<double> diffusion_var;  // int c ds
  std::vector<double> intensity;      // int lambda_j ds, [i * n_atoms + j]
  std::vector<double> majorant;       // thinning bound for lambda_j on interval i
  std::vector<double> compensator_h;  // sum_j p_k(e_j) int lambda_j, [i * dim + k]
  std::vector<double> bracket;        // int gamma_k^2 ds, [i * dim + k]
  std::vector<double> q_at_zero;      // alpha_{k,1} = q_k(0), dim
  std::vector<double> p_at_atom;      // p_k(e_j), [j * dim + k]
  std::vector<std::uint8_t> constant_intensity;  // n_atoms

  double bracket_at(std::size_t i, std::size_t k) const { return bracket[i * dim + k]; }
};

GridIntegrals compute_grid_integrals(const LevyCharacteristics& chars,
                                     const MartingaleBasis& basis, const TimeGrid& grid);

struct JumpEvent {
  double time = 0.0;
  std::uint32_t atom = 0;
};

struct BatchOptions {
  /// Number of distinct backward Brownian paths; path p uses group
  /// (first_path + p) % groups. Zero means one independent B per path.
  std::size_t backward_groups = 0;
  /// Global index of the first path, so a large batch can be built in chunks
  /// that reproduce the single-shot result.
  std::size_t first_path = 0;
};

/// Joint discrete sample paths of the jump part, the diffusion part and the
/// backward Brownian motion B, with basis increments dH. Immutable once built.
class PathBatch {
 public:
  PathBatch() = default;

  std::size_t paths() const { return n_paths_; }
  std::size_t steps() const { return grid_.steps(); }
  std::size_t dim() const { return integrals_.dim; }
  std::uint64_t seed() const { return seed_; }
  const BatchOptions& options() const { return options_; }
  const TimeGrid& grid() const { return grid_; }
  const GridIntegrals& integrals() const { return integrals_; }

  std::size_t backward_group(std::size_t path) const;

  double dW(std::size_t path, std::size_t i) const { return dW_[path * steps() + i]; }
  double dB(std::size_t path, std::size_t i) const { return dB_[path * steps() + i]; }
  /// Continuous part of dL on interval i: compensated drift plus diffusion.
  double dL_continuous(std::size_t path, std::size_t i) const {
    return dLc_[path * steps() + i];
  }
  double L(std::size_t path, std::size_t node) const { return L_[path * (steps() + 1) + node]; }
  std::span<const double> dH(std::size_t path, std::size_t i) const {
    return {dH_.data() + (path * steps() + i) * dim(), dim()};
  }
  std::span<const JumpEvent> jumps(std::size_t path, std::size_t i) const {
    const std::size_t k = path * steps() + i;
    return {jumps_.data() + jump_offset_[k], jump_offset_[k + 1] - jump_offset_[k]};
  }
  std::size_t total_jumps() const { return jumps_.size(); }

  /// Serialize to / from the binary cache format (magic "LBDS1").
  void write_cache(std::ostream& out) const;
  static PathBatch read_cache(std::istream& in);

 private:
  friend PathBatch simulate_batch(const LevyCharacteristics&, const MartingaleBasis&,
                                  const TimeGrid&, std::size_t, std::uint64_t, BatchOptions);
  friend PathBatch simulate_batch_serial(const LevyCharacteristics&, const MartingaleBasis&,
                                         const TimeGrid&, std::size_t, std::uint64_t,
                                         BatchOptions);
  friend class PathBatchBuilder;

  std::size_t n_paths_ = 0;
  std::uint64_t seed_ = 0;
  BatchOptions options_;
  TimeGrid grid_ = TimeGrid::uniform(0.0, 1.0, 1);
  GridIntegrals integrals_;
  std::vector<double> dW_, dB_, dLc_, L_, dH_;
  std::vector<std::size_t> jump_offset_;
  std::vector<JumpEvent> jumps_;
};

/// OpenMP kernel: paths are generated in parallel; output is bit-identical to
/// simulate_batch_serial for any thread count.
PathBatch simulate_batch(const LevyCharacteristics& chars, const MartingaleBasis& basis,
                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                         BatchOptions options = {});

/// Single-threaded reference implementation of simulate_batch.
PathBatch simulate_batch_serial(const LevyCharacteristics& chars, const MartingaleBasis& basis,
                                const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                BatchOptions options = {});

/// dH^(k) over interval i: sum over jumps of p_k(e) minus the compensator
/// sum_j p_k(e_j) int lambda_j, plus q_k(0) times the diffusion increment.
std::vector<double> h_increments(const GridIntegrals& integrals, std::span<const JumpEvent> jumps,
                                 double dW, std::size_t i);

/// sum_i G(tau_{i+1}) dB_i over intervals start..N-1 (right endpoints).
/// G holds N - start values.
double backward_integral(const PathBatch& batch, std::size_t path, std::size_t start,
                         std::span<const double> integrand);

/// sum_i sum_k Z^(k)(tau_i) dH^(k)_i over intervals start..N-1 (left endpoints).
/// Z is row-major (N - start) x d.
double forward_integral(const PathBatch& batch, std::size_t path, std::size_t start,
                        std::span<const double> z);

}  // namespace lbds
