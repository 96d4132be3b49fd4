#include "lbds/time_function.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace lbds {

double TimeExpr::operator()(double t) const {
  double sum = 0.0;
  for (const auto& term : terms) {
    double v = term.coef;
    if (term.power != 0) v *= std::pow(t, term.power);
    if (term.rate != 0.0) v *= std::exp(term.rate * t);
    sum += v;
  }
  return sum;
}

bool TimeExpr::is_constant() const {
  for (const auto& term : terms)
    if (term.coef != 0.0 && (term.power != 0 || term.rate != 0.0)) return false;
  return true;
}

TimeFunction::TimeFunction(double constant) : constant_(constant) {}

TimeFunction::TimeFunction(std::function<double(double)> fn) : fn_(std::move(fn)) {}

TimeFunction::TimeFunction(const TimeExpr& expr) {
  if (expr.is_constant()) {
    constant_ = expr(0.0);
  } else {
    fn_ = [expr](double t) { return expr(t); };
  }
}

double TimeFunction::integrate(double a, double b) const {
  if (constant_) return *constant_ * (b - a);
  return lbds::integrate(fn_, a, b);
}

double integrate(const std::function<double(double)>& fn, double a, double b) {
  if (b == a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(fn, a, b, 12, 1e-13, &err);
}

}  // namespace lbds
