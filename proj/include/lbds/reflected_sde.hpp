#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lbds/levy_model.hpp"
#include "lbds/path_engine.hpp"

namespace lbds {

enum class DomainKind { interval, ball, custom };

/// Smooth domain G = {Psi > 0} with inward normal field grad Psi.
/// Interval and ball presets support exact reflection steps; custom domains
/// can be evaluated but not stepped.
class SmoothDomain {
 public:
  using ScalarField = std::function<double(std::span<const double>)>;
  using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

  static SmoothDomain interval(double a, double b, double sphere_constant = 2.0);
  static SmoothDomain ball(std::vector<double> center, double radius, double sphere_constant = 2.0);
  static SmoothDomain custom(std::size_t dim, ScalarField psi, VectorField grad,
                             double sphere_constant);

  DomainKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double sphere_constant() const { return m_; }
  /// Interval bounds (interval preset) or center/radius (ball preset).
  double lower() const { return a_; }
  double upper() const { return b_; }
  std::span<const double> center() const { return center_; }
  double radius() const { return radius_; }

  double psi(std::span<const double> x) const;
  void grad_psi(std::span<const double> x, std::span<double> out) const;
  bool contains(std::span<const double> x, double tol = 1e-12) const;
  /// Euclidean distance to the boundary for presets; |Psi|/|grad Psi| otherwise.
  double boundary_distance(std::span<const double> x) const;

 private:
  SmoothDomain() = default;
  DomainKind kind_ = DomainKind::interval;
  std::size_t dim_ = 1;
  double a_ = 0.0, b_ = 1.0;
  std::vector<double> center_;
  double radius_ = 0.0;
  double m_ = 2.0;
  ScalarField psi_;
  VectorField grad_;
};

struct DomainSpec {
  DomainKind kind = DomainKind::interval;
  double a = 0.0, b = 1.0;
  std::vector<double> center;
  double radius = 1.0;
  double sphere_constant = 2.0;
};

SmoothDomain make_domain(const DomainSpec& spec);

struct ReflectStep {
  std::vector<double> point;
  double dkappa = 0.0;
};

/// Move x by `increment`, then pull back along the normal onto the boundary
/// if the candidate left the closed domain.
ReflectStep step_reflect(const SmoothDomain& domain, std::span<const double> x,
                         std::span<const double> increment);
/// In-place variant used by the path kernels; returns the local-time increment.
double step_reflect_inplace(const SmoothDomain& domain, std::span<double> x,
                            std::span<const double> increment);

struct InteriorSphereReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double min_value = 0.0;
};

/// Evaluates |x'-x|^2 + m <grad Psi(x), x'-x> on sampled boundary/closure pairs.
InteriorSphereReport check_interior_sphere(const SmoothDomain& domain, std::size_t pairs,
                                           std::uint64_t seed);

/// sigma(x) written into out (one entry per coordinate).
using SigmaField = std::function<void(std::span<const double> x, std::span<double> out)>;

SigmaField constant_sigma(std::vector<double> value);

/// Samples closure points and checks x + sigma(x) e_j stays in the closure for
/// every atom; throws InvalidArgument naming the first offending pair.
void validate_jump_invariance(const SmoothDomain& domain, const LevyCharacteristics& chars,
                              const SigmaField& sigma, std::size_t samples_per_axis = 1001);

/// Forward reflected paths on the nodes of a PathBatch grid.
class ReflectedBatch {
 public:
  std::size_t paths() const { return n_paths_; }
  std::size_t steps() const { return n_steps_; }
  std::size_t dim() const { return dim_; }
  std::size_t start_node() const { return start_node_; }
  double boundary_tol() const { return boundary_tol_; }

  std::span<const double> X(std::size_t path, std::size_t node) const {
    return {X_.data() + (path * (n_steps_ + 1) + node) * dim_, dim_};
  }
  double kappa(std::size_t path, std::size_t node) const {
    return kappa_[path * (n_steps_ + 1) + node];
  }
  /// True when interval i carried local time and X ended within boundary_tol of the boundary.
  bool near_boundary(std::size_t path, std::size_t i) const { return near_[path * n_steps_ + i]; }
  const std::vector<double>& X_data() const { return X_; }
  const std::vector<double>& kappa_data() const { return kappa_; }

 private:
  friend class ReflectedBatchBuilder;
  std::size_t n_paths_ = 0, n_steps_ = 0, dim_ = 1, start_node_ = 0;
  double boundary_tol_ = 1e-9;
  std::vector<double> X_, kappa_;
  std::vector<std::uint8_t> near_;
};

struct ReflectStart {
  std::size_t node = 0;  // X stays at x for nodes <= start node
  std::vector<double> x;
};

/// OpenMP kernel: Euler scheme with the continuous increment split around
/// jump times and reflected step by step. Bit-identical to solve_paths_serial.
ReflectedBatch solve_paths(const SmoothDomain& domain, const LevyCharacteristics& chars,
                           const SigmaField& sigma, const ReflectStart& start,
                           const PathBatch& batch);
ReflectedBatch solve_paths_serial(const SmoothDomain& domain, const LevyCharacteristics& chars,
                                  const SigmaField& sigma, const ReflectStart& start,
                                  const PathBatch& batch);

struct ComplementarityReport {
  double boundary_tol = 0.0;
  double min_psi = 0.0;
  double off_boundary_kappa = 0.0;  // sum of dkappa on intervals ending far from the boundary
  std::size_t active_intervals = 0;
};

ComplementarityReport complementarity(const SmoothDomain& domain, const ReflectedBatch& refl);

struct ReflectedMoments {
  double sup_abs_pow_mean = 0.0;  // E sup_s |X_s|^p
  double exp_kappa_mean = 0.0;    // E exp(mu kappa_T)
  double kappa_T_mean = 0.0;
};

ReflectedMoments reflected_moments(const ReflectedBatch& refl, double p, double mu);

/// Drops atoms with |e| <= 1/n; the remaining small jumps stay compensated.
LevyCharacteristics truncate_small_jumps(const LevyCharacteristics& chars, std::size_t n);

}  // namespace lbds
