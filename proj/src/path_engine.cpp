#include "lbds/path_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "lbds/error.hpp"
#include "lbds/rng.hpp"

namespace lbds {
namespace {

constexpr int kMajorantSamples = 33;
constexpr double kMajorantInflation = 1.25;

static_assert(std::endian::native == std::endian::little,
              "the binary cache format assumes a little-endian host");

struct JumpStreamKeys {
  std::vector<std::uint64_t> tags;
};

JumpStreamKeys jump_stream_keys(std::span<const double> sizes) {
  // Keyed by the atom size, so removing atoms leaves the other streams intact.
  JumpStreamKeys keys;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    std::uint64_t occurrence = 0;
    for (std::size_t m = 0; m < j; ++m) occurrence += sizes[m] == sizes[j];
    keys.tags.push_back(static_cast<std::uint64_t>(StreamTag::jumps) ^
                        (mix64(std::bit_cast<std::uint64_t>(sizes[j])) + occurrence));
  }
  return keys;
}

struct PathOutput {
  std::span<double> dW, dB, dLc, L, dH;
  std::vector<JumpEvent>* jumps;
  std::vector<std::size_t>* counts;  // jumps per interval
};

void simulate_path(const LevyCharacteristics& chars, const GridIntegrals& gi, const TimeGrid& grid,
                   const JumpStreamKeys& keys, std::uint64_t seed, std::size_t global_path,
                   std::size_t group, PathOutput out) {
  const std::size_t n = grid.steps();
  const std::size_t d = gi.dim;
  const auto atoms = chars.atoms();
  std::vector<JumpEvent> interval_jumps;
  double level = 0.0;
  out.L[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = grid.node(i);
    const double t1 = grid.node(i + 1);
    interval_jumps.clear();
    for (std::size_t j = 0; j < gi.n_atoms; ++j) {
      CounterRng rng(seed, global_path, i, keys.tags[j]);
      if (gi.constant_intensity[j]) {
        const double lam = gi.intensity[i * gi.n_atoms + j] / (t1 - t0);
        if (lam <= 0.0) continue;
        double t = t0 + rng.exponential() / lam;
        while (t < t1) {
          interval_jumps.push_back({t, static_cast<std::uint32_t>(j)});
          t += rng.exponential() / lam;
        }
      } else {
        const double bound = gi.majorant[i * gi.n_atoms + j];
        if (bound <= 0.0) continue;
        double t = t0 + rng.exponential() / bound;
        while (t < t1) {
          const double lam = atoms[j].intensity(t);
          if (lam > bound * (1.0 + 1e-12))
            throw NumericalError("thinning majorant underestimates the intensity");
          if (rng.uniform() * bound <= lam)
            interval_jumps.push_back({t, static_cast<std::uint32_t>(j)});
          t += rng.exponential() / bound;
        }
      }
    }
    std::sort(interval_jumps.begin(), interval_jumps.end(),
              [](const JumpEvent& a, const JumpEvent& b) {
                return a.time < b.time || (a.time == b.time && a.atom < b.atom);
              });

    double dw = 0.0;
    if (gi.diffusion_var[i] > 0.0) {
      CounterRng rng(seed, global_path, i, StreamTag::diffusion);
      dw = std::sqrt(gi.diffusion_var[i]) * rng.normal();
    }
    CounterRng brng(seed, group, i, StreamTag::backward);
    const double db = std::sqrt(t1 - t0) * brng.normal();

    const double dlc = gi.continuous_drift[i] + dw;
    double jump_sum = 0.0;
    for (const auto& ev : interval_jumps) jump_sum += gi.atom_size[ev.atom];
    level += dlc + jump_sum;

    out.dW[i] = dw;
    out.dB[i] = db;
    out.dLc[i] = dlc;
    out.L[i + 1] = level;
    const auto dh = h_increments(gi, interval_jumps, dw, i);
    std::copy(dh.begin(), dh.end(), out.dH.begin() + static_cast<std::ptrdiff_t>(i * d));
    (*out.counts)[i] = interval_jumps.size();
    out.jumps->insert(out.jumps->end(), interval_jumps.begin(), interval_jumps.end());
  }
}

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_vec(std::ostream& out, const std::vector<T>& v) {
  put<std::uint64_t>(out, v.size());
  if (!v.empty()) out.write(reinterpret_cast<const char*>(v.data()),
                            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InvalidArgument("truncated LBDS1 cache");
  return v;
}

template <class T>
std::vector<T> get_vec(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 40)) throw InvalidArgument("corrupt LBDS1 cache");
  std::vector<T> v(n);
  if (n) in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw InvalidArgument("truncated LBDS1 cache");
  return v;
}

constexpr char kMagic[5] = {'L', 'B', 'D', 'S', '1'};

}  // namespace

TimeGrid TimeGrid::uniform(double t0, double t_end, std::size_t n_steps) {
  if (n_steps == 0) throw InvalidArgument("time grid needs at least one step");
  if (!(t_end > t0)) throw InvalidArgument("time grid needs t0 < T");
  std::vector<double> nodes(n_steps + 1);
  for (std::size_t i = 0; i <= n_steps; ++i)
    nodes[i] = t0 + (t_end - t0) * static_cast<double>(i) / static_cast<double>(n_steps);
  nodes.back() = t_end;
  return TimeGrid(std::move(nodes));
}

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw InvalidArgument("time grid needs at least two nodes");
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i)
    if (!(nodes_[i + 1] > nodes_[i])) throw InvalidArgument("time grid must be strictly increasing");
}

std::size_t TimeGrid::index_of(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(end()));
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t - tol);
  if (it == nodes_.end() || std::abs(*it - t) > tol) {
    std::ostringstream msg;
    msg << "time " << t << " is not a grid node";
    throw InvalidArgument(msg.str());
  }
  return static_cast<std::size_t>(it - nodes_.begin());
}

GridIntegrals compute_grid_integrals(const LevyCharacteristics& chars,
                                     const MartingaleBasis& basis, const TimeGrid& grid) {
  if (grid.start() < -1e-12 || grid.end() > chars.horizon() * (1.0 + 1e-12) + 1e-12)
    throw InvalidArgument("time grid exceeds the horizon of the characteristics");
  GridIntegrals gi;
  const auto atoms = chars.atoms();
  gi.n_steps = grid.steps();
  gi.n_atoms = atoms.size();
  gi.dim = basis.dimension();
  for (const auto& a : atoms) {
    gi.atom_size.push_back(a.size);
    gi.constant_intensity.push_back(a.intensity.is_constant() ? 1 : 0);
  }
  gi.q_at_zero.resize(gi.dim);
  for (std::size_t k = 0; k < gi.dim; ++k) gi.q_at_zero[k] = basis.q(k, 0.0);
  gi.p_at_atom.resize(gi.n_atoms * gi.dim);
  for (std::size_t j = 0; j < gi.n_atoms; ++j)
    for (std::size_t k = 0; k < gi.dim; ++k) gi.p_at_atom[j * gi.dim + k] = basis.p(k, atoms[j].size);

  const std::size_t n = gi.n_steps;
  gi.continuous_drift.resize(n);
  gi.diffusion_var.resize(n);
  gi.intensity.resize(n * gi.n_atoms);
  gi.majorant.resize(n * gi.n_atoms);
  gi.compensator_h.assign(n * gi.dim, 0.0);
  gi.bracket.resize(n * gi.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = grid.node(i), t1 = grid.node(i + 1);
    double drift = chars.drift().integrate(t0, t1);
    gi.diffusion_var[i] = chars.diffusion().integrate(t0, t1);
    for (std::size_t j = 0; j < gi.n_atoms; ++j) {
      const double lam_int = atoms[j].intensity.integrate(t0, t1);
      gi.intensity[i * gi.n_atoms + j] = lam_int;
      // Big jumps are not compensated: their mean enters through the drift b-bar.
      if (std::abs(atoms[j].size) <= 1.0) drift -= atoms[j].size * lam_int;
      double peak = 0.0;
      for (int s = 0; s < kMajorantSamples; ++s) {
        const double lam = atoms[j].intensity(t0 + (t1 - t0) * s / (kMajorantSamples - 1));
        if (!std::isfinite(lam)) throw NumericalError("non-finite intensity in thinning majorant");
        peak = std::max(peak, lam);
      }
      gi.majorant[i * gi.n_atoms + j] = kMajorantInflation * peak;
      for (std::size_t k = 0; k < gi.dim; ++k)
        gi.compensator_h[i * gi.dim + k] += gi.p_at_atom[j * gi.dim + k] * lam_int;
    }
    gi.continuous_drift[i] = drift;
    for (std::size_t k = 0; k < gi.dim; ++k) gi.bracket[i * gi.dim + k] = basis.bracket_integral(k, t0, t1);
  }
  return gi;
}

std::vector<double> h_increments(const GridIntegrals& gi, std::span<const JumpEvent> jumps,
                                 double dW, std::size_t i) {
  if (i >= gi.n_steps) throw InvalidArgument("interval index out of range");
  std::vector<double> dh(gi.dim);
  for (std::size_t k = 0; k < gi.dim; ++k) {
    double v = 0.0;
    for (const auto& ev : jumps) v += gi.p_at_atom[ev.atom * gi.dim + k];
    dh[k] = v - gi.compensator_h[i * gi.dim + k] + gi.q_at_zero[k] * dW;
  }
  return dh;
}

std::size_t PathBatch::backward_group(std::size_t path) const {
  const std::size_t global = options_.first_path + path;
  return options_.backward_groups == 0 ? global : global % options_.backward_groups;
}

class PathBatchBuilder {
 public:
  static PathBatch allocate(const LevyCharacteristics& chars, const MartingaleBasis& basis,
                            const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            BatchOptions options) {
    if (n_paths == 0) throw InvalidArgument("batch needs at least one path");
    PathBatch b;
    b.n_paths_ = n_paths;
    b.seed_ = seed;
    b.options_ = options;
    b.grid_ = grid;
    b.integrals_ = compute_grid_integrals(chars, basis, grid);
    const std::size_t n = grid.steps();
    b.dW_.resize(n_paths * n);
    b.dB_.resize(n_paths * n);
    b.dLc_.resize(n_paths * n);
    b.L_.resize(n_paths * (n + 1));
    b.dH_.resize(n_paths * n * b.integrals_.dim);
    b.jump_offset_.assign(n_paths * n + 1, 0);
    return b;
  }

  static PathOutput view(PathBatch& b, std::size_t p, std::vector<JumpEvent>* jumps,
                         std::vector<std::size_t>* counts) {
    const std::size_t n = b.steps();
    const std::size_t d = b.dim();
    return PathOutput{{b.dW_.data() + p * n, n},
                      {b.dB_.data() + p * n, n},
                      {b.dLc_.data() + p * n, n},
                      {b.L_.data() + p * (n + 1), n + 1},
                      {b.dH_.data() + p * n * d, n * d},
                      jumps,
                      counts};
  }

  static void gather_jumps(PathBatch& b, const std::vector<std::vector<JumpEvent>>& jumps,
                           const std::vector<std::vector<std::size_t>>& counts) {
    const std::size_t n = b.steps();
    std::size_t total = 0;
    for (std::size_t p = 0; p < b.n_paths_; ++p) {
      for (std::size_t i = 0; i < n; ++i) {
        b.jump_offset_[p * n + i] = total;
        total += counts[p][i];
      }
    }
    b.jump_offset_[b.n_paths_ * n] = total;
    b.jumps_.reserve(total);
    for (const auto& v : jumps) b.jumps_.insert(b.jumps_.end(), v.begin(), v.end());
  }

  static void set_from_cache(PathBatch& b, std::istream& in);
};

PathBatch simulate_batch(const LevyCharacteristics& chars, const MartingaleBasis& basis,
                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                         BatchOptions options) {
  PathBatch b = PathBatchBuilder::allocate(chars, basis, grid, n_paths, seed, options);
  const auto keys = jump_stream_keys(b.integrals_.atom_size);
  std::vector<std::vector<JumpEvent>> jumps(n_paths);
  std::vector<std::vector<std::size_t>> counts(n_paths, std::vector<std::size_t>(grid.steps()));
  std::string failure;
  const auto np = static_cast<std::ptrdiff_t>(n_paths);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ps = 0; ps < np; ++ps) {
    const auto p = static_cast<std::size_t>(ps);
    try {
      simulate_path(chars, b.integrals_, grid, keys, seed, options.first_path + p,
                    b.backward_group(p), PathBatchBuilder::view(b, p, &jumps[p], &counts[p]));
    } catch (const std::exception& e) {
#pragma omp critical(lbds_simulate_failure)
      failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalError(failure);
  PathBatchBuilder::gather_jumps(b, jumps, counts);
  return b;
}

PathBatch simulate_batch_serial(const LevyCharacteristics& chars, const MartingaleBasis& basis,
                                const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                BatchOptions options) {
  PathBatch b = PathBatchBuilder::allocate(chars, basis, grid, n_paths, seed, options);
  const auto keys = jump_stream_keys(b.integrals_.atom_size);
  std::vector<std::vector<JumpEvent>> jumps(n_paths);
  std::vector<std::vector<std::size_t>> counts(n_paths, std::vector<std::size_t>(grid.steps()));
  for (std::size_t p = 0; p < n_paths; ++p)
    simulate_path(chars, b.integrals_, grid, keys, seed, options.first_path + p,
                  b.backward_group(p), PathBatchBuilder::view(b, p, &jumps[p], &counts[p]));
  PathBatchBuilder::gather_jumps(b, jumps, counts);
  return b;
}

double backward_integral(const PathBatch& batch, std::size_t path, std::size_t start,
                         std::span<const double> integrand) {
  const std::size_t n = batch.steps();
  if (start > n || integrand.size() != n - start)
    throw InvalidArgument("backward integrand length must equal N - start");
  double s = 0.0;
  for (std::size_t k = 0; k < integrand.size(); ++k) s += integrand[k] * batch.dB(path, start + k);
  return s;
}

double forward_integral(const PathBatch& batch, std::size_t path, std::size_t start,
                        std::span<const double> z) {
  const std::size_t n = batch.steps();
  const std::size_t d = batch.dim();
  if (start > n || z.size() != (n - start) * d)
    throw InvalidArgument("forward integrand must hold (N - start) x d values");
  double s = 0.0;
  for (std::size_t k = 0; k < n - start; ++k) {
    const auto dh = batch.dH(path, start + k);
    for (std::size_t m = 0; m < d; ++m) s += z[k * d + m] * dh[m];
  }
  return s;
}

void PathBatch::write_cache(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, n_paths_);
  put<std::uint64_t>(out, seed_);
  put<std::uint64_t>(out, options_.backward_groups);
  put<std::uint64_t>(out, options_.first_path);
  put_vec(out, std::vector<double>(grid_.nodes().begin(), grid_.nodes().end()));
  const auto& gi = integrals_;
  put<std::uint64_t>(out, gi.n_atoms);
  put<std::uint64_t>(out, gi.dim);
  put_vec(out, gi.atom_size);
  put_vec(out, gi.continuous_drift);
  put_vec(out, gi.diffusion_var);
  put_vec(out, gi.intensity);
  put_vec(out, gi.majorant);
  put_vec(out, gi.compensator_h);
  put_vec(out, gi.bracket);
  put_vec(out, gi.q_at_zero);
  put_vec(out, gi.p_at_atom);
  put_vec(out, gi.constant_intensity);
  put_vec(out, dW_);
  put_vec(out, dB_);
  put_vec(out, dLc_);
  put_vec(out, L_);
  put_vec(out, dH_);
  std::vector<std::uint64_t> offsets(jump_offset_.begin(), jump_offset_.end());
  put_vec(out, offsets);
  put<std::uint64_t>(out, jumps_.size());
  for (const auto& ev : jumps_) {
    put<double>(out, ev.time);
    put<std::uint64_t>(out, ev.atom);
  }
}

void PathBatchBuilder::set_from_cache(PathBatch& b, std::istream& in) {
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw InvalidArgument("not an LBDS1 cache (bad magic)");
  b.n_paths_ = get<std::uint64_t>(in);
  b.seed_ = get<std::uint64_t>(in);
  b.options_.backward_groups = get<std::uint64_t>(in);
  b.options_.first_path = get<std::uint64_t>(in);
  b.grid_ = TimeGrid(get_vec<double>(in));
  auto& gi = b.integrals_;
  gi.n_steps = b.grid_.steps();
  gi.n_atoms = get<std::uint64_t>(in);
  gi.dim = get<std::uint64_t>(in);
  gi.atom_size = get_vec<double>(in);
  gi.continuous_drift = get_vec<double>(in);
  gi.diffusion_var = get_vec<double>(in);
  gi.intensity = get_vec<double>(in);
  gi.majorant = get_vec<double>(in);
  gi.compensator_h = get_vec<double>(in);
  gi.bracket = get_vec<double>(in);
  gi.q_at_zero = get_vec<double>(in);
  gi.p_at_atom = get_vec<double>(in);
  gi.constant_intensity = get_vec<std::uint8_t>(in);
  b.dW_ = get_vec<double>(in);
  b.dB_ = get_vec<double>(in);
  b.dLc_ = get_vec<double>(in);
  b.L_ = get_vec<double>(in);
  b.dH_ = get_vec<double>(in);
  const auto offsets = get_vec<std::uint64_t>(in);
  b.jump_offset_.assign(offsets.begin(), offsets.end());
  const auto n_jumps = get<std::uint64_t>(in);
  b.jumps_.resize(n_jumps);
  for (auto& ev : b.jumps_) {
    ev.time = get<double>(in);
    ev.atom = static_cast<std::uint32_t>(get<std::uint64_t>(in));
  }
  const std::size_t n = gi.n_steps;
  if (b.dW_.size() != b.n_paths_ * n || b.L_.size() != b.n_paths_ * (n + 1) ||
      b.dH_.size() != b.n_paths_ * n * gi.dim || b.jump_offset_.size() != b.n_paths_ * n + 1 ||
      b.jump_offset_.back() != b.jumps_.size())
    throw InvalidArgument("inconsistent LBDS1 cache");
}

PathBatch PathBatch::read_cache(std::istream& in) {
  PathBatch b;
  PathBatchBuilder::set_from_cache(b, in);
  return b;
}

}  // namespace lbds
