#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbds/path_engine.hpp"
#include "lbds/reflected_sde.hpp"
#include "lbds/regression.hpp"

namespace lbds {

/// Where a driver is evaluated: time, grid node, path and forward state.
struct DriverContext {
  double t = 0.0;
  std::size_t node = 0;
  std::size_t path = 0;
  std::span<const double> x;
  double kappa = 0.0;
};

using DriverFn = std::function<double(const DriverContext&, double y, std::span<const double> z)>;
using BoundaryFn = std::function<double(const DriverContext&, double y)>;
using StateFn = std::function<double(const DriverContext&)>;

/// Declared structural constants of the drivers (taken constant in time).
struct DriverBounds {
  double lambda = 0.0;        // (y-y')(f(y)-f(y')) <= lambda |y-y'|^2
  double varrho = 0.0;        // (y-y')(h(y)-h(y')) <= varrho |y-y'|^2
  double eta = 0.0;           // |f(z)-f(z')| <= eta |gamma (z-z')|
  double rho = 0.0;           // |g(y,z)-g(y',z')|^2 <= rho |y-y'|^2 + alpha |gamma (z-z')|^2
  double alpha = 0.0;
  double varphi = 1.0;        // |f(y,0)| <= varphi + phi |y|
  double phi = 0.0;
  double psi = 1.0;           // |h(y)| <= psi + zeta |y|
  double zeta = 0.0;
  double lipschitz_y = 0.0;   // Lipschitz constant of f in y
};

struct DriverSet {
  DriverFn f;
  BoundaryFn h;
  DriverFn g;
  DriverBounds bounds;
  bool f_uses_z = true;
  bool g_uses_yz = true;
  bool g_vanishes = false;
  /// f is monotone in y, so implicit steps may use a root solve.
  bool monotone = false;
};

DriverSet zero_drivers();

struct ProbeBox {
  double t0 = 0.0, t1 = 1.0;
  std::vector<double> x_lo{0.0}, x_hi{1.0};
  double y_max = 2.0;
  double z_max = 2.0;
  double kappa_max = 1.0;
  std::size_t z_dim = 0;
  /// gamma^(k)(t); empty means gamma = 1.
  std::function<double(std::size_t, double)> gamma;
};

struct DriverCheckReport {
  std::size_t probes = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Spot-checks the declared bounds on random probes.
DriverCheckReport probe_driver_bounds(const DriverSet& drivers, const ProbeBox& box,
                                      std::size_t probes, std::uint64_t seed);
/// As probe_driver_bounds, throwing InvalidArgument on the first violation.
void check_driver_bounds(const DriverSet& drivers, const ProbeBox& box, std::size_t probes,
                         std::uint64_t seed);

/// Scalar monotone map y -> phi(y).
using ScalarMap = std::function<double(double)>;

/// Root J of J - delta phi(J) = y.
double yosida_resolvent(const ScalarMap& phi, double y, double delta);
/// (J_delta(y) - y) / delta.
double yosida_apply(const ScalarMap& phi, double y, double delta);
/// Yosida regularization of f and h in y (z and context held fixed).
DriverSet yosida_regularize(const DriverSet& drivers, double delta);
/// f_p(y) = f(y) - f(0) + cap_p(f(0)), where cap_p rescales f(0) to modulus at most p.
DriverFn truncate_generator(const DriverFn& f, double p);
BoundaryFn truncate_generator(const BoundaryFn& h, double p);

/// Forward state seen by the drivers: X at nodes and the increasing process kappa.
class ForwardState {
 public:
  /// No state variables and kappa = 0.
  static ForwardState none(const PathBatch& batch);
  /// State X = L at the nodes, kappa = 0.
  static ForwardState levy(const PathBatch& batch);
  static ForwardState reflected(const ReflectedBatch& refl);
  /// Replaces kappa by a deterministic nondecreasing function of time.
  ForwardState with_kappa(const TimeGrid& grid, const std::function<double(double)>& kappa) const;

  std::size_t paths() const { return paths_; }
  std::size_t steps() const { return steps_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> X(std::size_t p, std::size_t node) const {
    return {x_.data() + (p * (steps_ + 1) + node) * dim_, dim_};
  }
  double kappa(std::size_t p, std::size_t node) const { return kappa_[p * (steps_ + 1) + node]; }

 private:
  std::size_t paths_ = 0, steps_ = 0, dim_ = 0;
  std::vector<double> x_, kappa_;
};

struct RGBDSDEProblem {
  StateFn terminal;
  DriverSet drivers;
  /// Lower obstacle S(t, state); empty means no reflection.
  StateFn obstacle;
};

enum class PicardInit { zero, obstacle };

struct SolverConfig {
  RegressionOptions regression;
  std::size_t max_inner = 500;
  double inner_tol = 1e-14;
  std::size_t picard_max_iters = 30;
  double picard_tol = 1e-6;
  PicardInit picard_init = PicardInit::zero;
  /// Weights of the Picard residual norm.
  double theta = 1.0;
  double mu = 1.0;
  double epsilon = 1e-6;
};

struct SolutionDiagnostics {
  std::vector<double> picard_residuals;
  std::size_t iterations = 0;
  bool converged = true;
  /// sum (Y_i - S_i) dK_i at the nodes where the push happens.
  double skorokhod_node = 0.0;
  /// Trapezoid version (mean over paths); O(dtau) in general.
  double skorokhod_trapezoid = 0.0;
  double min_push = 0.0;
  double min_gap = 0.0;  // min over nodes of Y - S
  std::size_t inner_iterations_max = 0;
  /// Residual variance of the regression target at the first step.
  double y0_residual_var = 0.0;
};

class SolutionGrid {
 public:
  SolutionGrid() = default;
  SolutionGrid(std::size_t paths, std::size_t steps, std::size_t dim);

  std::size_t paths() const { return paths_; }
  std::size_t steps() const { return steps_; }
  std::size_t dim() const { return dim_; }
  double& Y(std::size_t p, std::size_t node) { return y_[p * (steps_ + 1) + node]; }
  double Y(std::size_t p, std::size_t node) const { return y_[p * (steps_ + 1) + node]; }
  double& K(std::size_t p, std::size_t node) { return k_[p * (steps_ + 1) + node]; }
  double K(std::size_t p, std::size_t node) const { return k_[p * (steps_ + 1) + node]; }
  /// Z at node i < steps, d components.
  std::span<double> Z(std::size_t p, std::size_t i) { return {z_.data() + (p * steps_ + i) * dim_, dim_}; }
  std::span<const double> Z(std::size_t p, std::size_t i) const {
    return {z_.data() + (p * steps_ + i) * dim_, dim_};
  }
  /// Mean of Y at node 0 and its Monte Carlo standard error.
  double Y0_mean() const;
  double Y0_se() const;

  SolutionDiagnostics diagnostics;

 private:
  std::size_t paths_ = 0, steps_ = 0, dim_ = 0;
  std::vector<double> y_, k_, z_;
};

/// Backward regression scheme without an obstacle.
SolutionGrid solve_lipschitz(const RGBDSDEProblem& problem, const ForwardState& fwd,
                             const PathBatch& batch, const SolverConfig& config = {});
/// Backward scheme with projection Y_i = max(Yhat_i, S_i).
SolutionGrid solve_reflected(const RGBDSDEProblem& problem, const ForwardState& fwd,
                             const PathBatch& batch, const SolverConfig& config = {});
/// Outer Picard loop freezing (Y, Z) inside g and Z inside f.
SolutionGrid picard_solve(const RGBDSDEProblem& problem, const ForwardState& fwd,
                          const PathBatch& batch, const SolverConfig& config = {});
/// Picard solve of the Yosida-regularized problem.
SolutionGrid solve_yosida(const RGBDSDEProblem& problem, double delta, const ForwardState& fwd,
                          const PathBatch& batch, const SolverConfig& config = {});

/// Phi = exp(theta V + mu kappa) with V = a^2 (t - t0).
class WeightProcess {
 public:
  /// Throws InvalidArgument when a^2 < epsilon.
  WeightProcess(const DriverBounds& bounds, const ForwardState& fwd, const TimeGrid& grid,
                double theta, double mu, double epsilon);
  WeightProcess(double a2, const ForwardState& fwd, const TimeGrid& grid, double theta, double mu);
  double a2() const { return a2_; }
  double theta() const { return theta_; }
  double mu() const { return mu_; }
  double V(std::size_t node) const { return v_[node]; }
  double Phi(std::size_t p, std::size_t node) const { return phi_[p * (steps_ + 1) + node]; }

 private:
  double a2_, theta_, mu_;
  std::size_t steps_;
  std::vector<double> v_, phi_;
};

struct NormReport {
  double S2 = 0.0;    // E sup Phi Y^2
  double H2Q = 0.0;   // E int Phi Y^2 dQ
  double H2l2 = 0.0;  // E int Phi |gamma Z|^2 dt
  double K2 = 0.0;    // E K_T^2
  double total() const { return S2 + H2Q + H2l2 + K2; }
};

NormReport weighted_norms(const SolutionGrid& sol, const WeightProcess& w, const ForwardState& fwd,
                          const PathBatch& batch);
/// sqrt(|Y1-Y2|^2_{H2Q} + |Z1-Z2|^2_{H2l2}).
double weighted_distance(const SolutionGrid& a, const SolutionGrid& b, const WeightProcess& w,
                         const ForwardState& fwd, const PathBatch& batch);

struct AprioriReport {
  double lhs = 0.0;
  double rhs_data = 0.0;
  double ratio = 0.0;
  bool trivial = false;
  bool finite = true;
};

/// Requires theta > 4 + 2/(1 - 2 alpha).
AprioriReport apriori_check(const RGBDSDEProblem& problem, const SolutionGrid& sol,
                            const WeightProcess& w, const ForwardState& fwd, const PathBatch& batch);

struct ComparisonReport {
  double violation_fraction = 0.0;
  double tolerance = 0.0;
  double min_gap = 0.0;  // min over (path, node) of Y2 - Y1
  double y0_gap = 0.0;
  SolutionGrid first, second;
};

/// Solves both problems on the same paths and counts (path, node) pairs with
/// Y1 > Y2 + tol, tol = 3 SE of the Y0 difference. Checks xi1 <= xi2 and f1 <= f2 on probes.
ComparisonReport compare_solutions(const RGBDSDEProblem& p1, const RGBDSDEProblem& p2,
                                   const ForwardState& fwd, const PathBatch& batch,
                                   const SolverConfig& config = {});

/// Problem for exp(lambda t + mu kappa) Y; maps solutions back with exponential_restore.
RGBDSDEProblem exponential_change(const RGBDSDEProblem& problem, double lambda, double mu);
SolutionGrid exponential_restore(const SolutionGrid& transformed, double lambda, double mu,
                                 const ForwardState& fwd, const PathBatch& batch);

struct ResidualStats {
  std::vector<double> mean;  // per interval
  std::vector<double> se;
};

/// Per-interval MC mean of Y_i - Y_{i+1} - f dt - h dkappa - g dB - dK + Z.dH.
ResidualStats backward_residuals(const RGBDSDEProblem& problem, const SolutionGrid& sol,
                                 const ForwardState& fwd, const PathBatch& batch);

}  // namespace lbds
