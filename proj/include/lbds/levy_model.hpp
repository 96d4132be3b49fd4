#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lbds/time_function.hpp"

namespace lbds {

/// Jump of fixed size `size` arriving with time-varying rate `intensity`.
struct JumpAtom {
  double size = 0.0;
  TimeFunction intensity;
};

enum class Modulation { proportional, general };

/// Outcome of validating a set of characteristics.
struct ValidationReport {
  /// Integral over [0,T] of |b| + |c| + sum (1 ^ e^2) intensity.
  double nl1_integral = 0.0;
  /// Exponential-moment range [-u_max, u_max] and the bound
  /// sup_u int_0^T sum_{|e|>1} exp(u e) intensity ds over it.
  double nl2_u_max = 0.0;
  double nl2_bound = 0.0;
  bool proportional_detected = false;
  /// Reference time where r(t_ref) = 1 (first time with positive pi-weight).
  double reference_time = 0.0;
  /// Samples (t, r(t)) of the common modulation; empty in general mode.
  std::vector<std::pair<double, double>> modulation_samples;
};

/// Drift/diffusion/finite-atom description (b_t, c_t, F_t) of a
/// non-homogeneous Levy process on [0, T]. Atoms are stored sorted by size.
/// Construction validates the model; invalid characteristics never exist.
class LevyCharacteristics {
 public:
  LevyCharacteristics(double horizon, TimeFunction drift, TimeFunction diffusion,
                      std::vector<JumpAtom> atoms, Modulation mode);

  double horizon() const { return horizon_; }
  const TimeFunction& drift() const { return drift_; }
  const TimeFunction& diffusion() const { return diffusion_; }
  std::span<const JumpAtom> atoms() const { return atoms_; }
  Modulation mode() const { return mode_; }
  const ValidationReport& report() const { return report_; }

  /// Common modulation r(t) with r(t_ref) = 1. Proportional mode only.
  double modulation(double t) const;
  /// Time integral of r over [a, b]. Proportional mode only.
  double modulation_integral(double a, double b) const;
  /// pi-weights at the reference time: c(t_ref) and e_j^2 intensity_j(t_ref).
  double reference_diffusion() const;
  double reference_intensity(std::size_t atom) const;

  void check_time(double t) const;

 private:
  double horizon_;
  TimeFunction drift_;
  TimeFunction diffusion_;
  std::vector<JumpAtom> atoms_;
  Modulation mode_;
  ValidationReport report_;
  double reference_weight_ = 0.0;
};

ValidationReport validate_characteristics(const LevyCharacteristics& chars);

/// Whether c and every intensity share one time profile, sampled on [0, T].
bool detect_proportional(double horizon, const TimeFunction& diffusion,
                         std::span<const JumpAtom> atoms);

/// Drift of the compensated decomposition: b(t) + sum_{|e_j|>1} e_j intensity_j(t).
double mean_drift(const LevyCharacteristics& chars, double t);

/// m^(i)(t) = E[L^(i)_t]; for i = 1 the integral of mean_drift.
double power_moment(const LevyCharacteristics& chars, int i, double t);

/// Moments m^(i)(t) for i = 1..i_max.
class MomentTable {
 public:
  MomentTable(const LevyCharacteristics& chars, int i_max);
  int max_order() const { return i_max_; }
  double operator()(int i, double t) const;

 private:
  LevyCharacteristics chars_;
  int i_max_;
};

}  // namespace lbds
