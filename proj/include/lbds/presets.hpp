#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbds/bdsde_solver.hpp"
#include "lbds/sipde.hpp"

namespace lbds {

/// Catalogue driver: clamp(P(y) + sum_k w_k z_k + x_coef x_0, -cap, cap) with
/// P a polynomial in y. x_0 is the first state coordinate (0 without state).
struct DriverSpec {
  enum class Kind { zero, linear, cubic_monotone, capped, polynomial };

  Kind kind = Kind::zero;
  std::vector<double> y;  // ascending coefficients of P
  std::vector<double> z;
  double x = 0.0;
  double cap = std::numeric_limits<double>::infinity();

  static DriverSpec zero() { return {}; }
  /// a y + c + z.w + x_coef x_0
  static DriverSpec linear(double a, double c = 0.0, std::vector<double> z = {}, double x = 0.0);
  /// c - b y - a y^3 with a, b >= 0.
  static DriverSpec cubic_monotone(double a, double b = 0.0, double c = 0.0);
  static DriverSpec capped(double a, double c, double cap, std::vector<double> z = {}, double x = 0.0);
  static DriverSpec polynomial(std::vector<double> coeffs, std::vector<double> z = {}, double x = 0.0);

  double operator()(double x0, double y, std::span<const double> z) const;
  /// dP/dy (zero where the cap is active).
  double dy(double x0, double y, std::span<const double> z) const;
  bool vanishes() const;
  bool uses_y() const;
  bool uses_z() const;
  /// Degree of P after trailing zeros are dropped (-1 for P = 0).
  int degree() const;
  /// sup over y of P'(y); +inf when unbounded.
  double sup_slope() const;
  /// sup over y of |P'(y)|; +inf when unbounded.
  double lipschitz() const;
  /// True when P' <= 0 everywhere.
  bool nonincreasing() const;
};

std::string to_string(DriverSpec::Kind kind);
/// Throws InvalidArgument for unknown names.
DriverSpec::Kind driver_kind(const std::string& name);

/// Polynomial field sum c t^i x_0^j; an empty term list is the zero field.
struct FieldSpec {
  struct Term {
    double coef = 0.0;
    int t_power = 0;
    int x_power = 0;
  };
  std::vector<Term> terms;

  static FieldSpec constant(double c) { return {{{c, 0, 0}}}; }
  double operator()(double t, double x0) const;
};

struct ProblemSpec {
  DriverSpec f, g, h;
  FieldSpec terminal;
  std::optional<FieldSpec> obstacle;
};

/// Drivers with bounds derived from the catalogue parameters. x_bound bounds
/// |x_0| in the growth constants; gamma_min bounds gamma^(k) from below.
DriverSet make_drivers(const ProblemSpec& spec, double x_bound = 1.0, double gamma_min = 1.0);
RGBDSDEProblem make_problem(const ProblemSpec& spec, double x_bound = 1.0, double gamma_min = 1.0);

/// sigma(x) = c + slope x for one-dimensional states.
struct AffineSigma {
  double c = 1.0;
  double slope = 0.0;
  double operator()(double x) const { return c + slope * x; }
};

SIPDEProblem make_sipde(LevyCharacteristics chars, SmoothDomain domain, AffineSigma sigma,
                        const ProblemSpec& spec);

/// a^2 for the weight process: the sum of the finite parts of
/// |lambda| + phi + phi^2 + rho + eta^2, floored at epsilon.
double weight_rate(const DriverBounds& bounds, double epsilon);

/// Smallest gamma^(k)(t) over the grid nodes and components (1 when d = 0).
double gamma_floor(const MartingaleBasis& basis, std::span<const double> nodes);

namespace models {

LevyCharacteristics poisson(double lambda = 2.0, double T = 1.0);
LevyCharacteristics two_atom(double T = 1.0);
/// Drift, diffusion and two atoms: three basis directions.
LevyCharacteristics mixed(double T = 1.0);

/// Standard stochastic test model on the two-atom process, X = L:
/// f = -y + 0.5 z_1, g = 0.3 y, xi = 0.5 + 0.25 x^2, S = 0.45 (1 - t).
ProblemSpec z_coupled();
/// f = -y^3 - y, h = -0.5 y^3 - 0.2 y, g = 0.2, same terminal and obstacle.
ProblemSpec cubic();
/// Yosida suite components of the cubic model.
DriverSpec cubic_f();
DriverSpec cubic_h();

/// Deterministic 1D obstacle SIPDE on [0, 1] with sigma = 0.5 (1 - x).
SIPDEProblem sipde(bool with_obstacle = true);
ProblemSpec sipde_spec(bool with_obstacle = true);

}  // namespace models

}  // namespace lbds
