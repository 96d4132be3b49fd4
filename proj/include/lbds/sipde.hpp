#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lbds/bdsde_solver.hpp"
#include "lbds/doss_sussmann.hpp"
#include "lbds/reflected_sde.hpp"

namespace lbds {

/// Obstacle integro-PDE with nonlinear Neumann boundary on an interval,
/// driven by a pure-jump L with jumps of size at most one. The drivers see
/// the one-dimensional state through DriverContext::x.
struct SIPDEProblem {
  LevyCharacteristics chars;
  SmoothDomain domain = SmoothDomain::interval(0.0, 1.0);
  ScalarSigma sigma;
  DriverSet drivers;
  std::function<double(double x)> terminal;
  std::function<double(double t, double x)> obstacle;  // empty: no obstacle
  double growth_C = 1.0;
  double growth_p = 2.0;
};

struct SIPDECheck {
  double max_terminal_gap = 0.0;  // max of S(T, x) - H(x); <= 0 when valid
  double max_growth_ratio = 0.0;  // max |H(x)| / (C (1 + |x|^p))
};

/// Throws InvalidArgument when c != 0, a jump exceeds one, the domain is not
/// an interval, jumps leave the closure, S(T,.) > H or H breaks its growth bound.
SIPDECheck validate_sipde(const SIPDEProblem& problem, std::size_t samples = 201);

struct MonteCarloConfig {
  std::size_t paths = 20000;
  std::size_t steps = 100;  // per unit of time; at least one step per point
  std::uint64_t seed = 1;
  /// Backward paths shared by every forward path of a point when g does not vanish.
  std::size_t backward_groups = 1;
  SolverConfig solver;
};

/// u on a (t, x) product grid. Row-major in t.
struct SolutionField {
  std::vector<double> t, x;
  std::vector<double> u, se;
  std::vector<std::string> failures;  // per point, empty on success
  std::size_t paths = 0, steps = 0;
  std::uint64_t seed = 0;

  double& at(std::size_t i, std::size_t j) { return u[i * x.size() + j]; }
  double at(std::size_t i, std::size_t j) const { return u[i * x.size() + j]; }
  /// Bilinear interpolation; t and x must lie inside the grid.
  double interpolate(double t, double x) const;
  /// Largest jump between adjacent cells.
  double continuity_modulus() const;
};

/// Monte Carlo representation u(t,x) = Y_t^{t,x}. Per-point failures are
/// recorded in SolutionField::failures and the value set to NaN.
SolutionField mc_representation(const SIPDEProblem& problem, const std::vector<double>& t,
                                const std::vector<double>& x, const MonteCarloConfig& config);

/// u(t, .) tabulated on a uniform grid of an interval; cubic interpolation.
class Profile {
 public:
  Profile(std::vector<double> x, std::vector<double> u);
  static Profile from(const std::function<double(double)>& fn, double a, double b, std::size_t n);
  double operator()(double x) const;
  double derivative(double x) const;
  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }

 private:
  std::vector<double> x_, u_;
  double h_;
};

/// b sigma D_x u + sum_j [u(x + sigma e_j) - u - D_x u sigma e_j] lambda_j(t).
double generator_apply(const SIPDEProblem& problem, const Profile& u, double t, double x);

/// Component k: sum_j [u(x + sigma e_j) - u - D_x u e_j] p_k(e_j) lambda_j(t).
std::vector<double> u1k_terms(const SIPDEProblem& problem, const MartingaleBasis& basis, const Profile& u,
                              double t, double x);

struct FDConfig {
  std::size_t space_cells = 400;
  std::size_t time_steps = 400;
};

/// Implicit upwind finite differences for g = 0: nonlocal terms explicit,
/// second-order one-sided Neumann rows, projection on the obstacle. Returns the
/// field on the full (time_steps + 1) x (space_cells + 1) grid.
SolutionField fd_obstacle_solve(const SIPDEProblem& problem, const FDConfig& config);

struct ComparePoint {
  double t = 0.0, x = 0.0, mc = 0.0, fd = 0.0, diff = 0.0, se = 0.0;
  bool pass = false;
};

struct CompareReport {
  double scheme_tol = 0.0;
  double max_diff = 0.0;
  double max_allowed = 0.0;  // 3 (SE + scheme_tol) at the worst point
  bool pass = true;
  std::vector<ComparePoint> points;
};

/// |mc - fd| <= 3 (SE + scheme_tol) at every MC grid point; fd is interpolated.
CompareReport compare_report(const SolutionField& mc, const SolutionField& fd, double scheme_tol);

}  // namespace lbds
