#pragma once

#include <functional>
#include <optional>
#include <vector>

namespace lbds {

/// One term c * t^power * exp(rate * t) of a time expression.
struct TimeTerm {
  double coef = 0.0;
  int power = 0;
  double rate = 0.0;
};

/// Sums of polynomial-times-exponential terms in t. This is the only form of
/// time dependence accepted from configuration files.
struct TimeExpr {
  std::vector<TimeTerm> terms;

  static TimeExpr constant(double c) { return TimeExpr{{TimeTerm{c, 0, 0.0}}}; }
  double operator()(double t) const;
  bool is_constant() const;
};

/// Deterministic scalar function of time. Constant functions are tagged so
/// that integrals and samplers can take exact shortcuts.
class TimeFunction {
 public:
  TimeFunction() : TimeFunction(0.0) {}
  TimeFunction(double constant);  // NOLINT(google-explicit-constructor)
  explicit TimeFunction(std::function<double(double)> fn);
  explicit TimeFunction(const TimeExpr& expr);

  double operator()(double t) const { return constant_ ? *constant_ : fn_(t); }
  bool is_constant() const { return constant_.has_value(); }
  std::optional<double> constant_value() const { return constant_; }

  /// Integral over [a, b].
  double integrate(double a, double b) const;

 private:
  std::optional<double> constant_;
  std::function<double(double)> fn_;
};

/// Adaptive Gauss-Kronrod quadrature with absolute tolerance 1e-12.
double integrate(const std::function<double(double)>& fn, double a, double b);

}  // namespace lbds
