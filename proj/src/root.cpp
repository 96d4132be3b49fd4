#include "lbds/root.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

#include "lbds/error.hpp"

namespace lbds {

double increasing_root(const std::function<double(double)>& F, double guess) {
  const double f0 = F(guess);
  if (f0 == 0.0) return guess;
  if (!std::isfinite(f0)) throw NumericalError("root solve: non-finite function value");
  double step = 1.0 + std::abs(guess);
  double lo = guess, hi = guess, flo = f0, fhi = f0;
  int doublings = 0;
  while (flo > 0.0 || fhi < 0.0) {
    if (++doublings > 60) throw NumericalError("root solve: bracket expansion failed (map not monotone?)");
    if (f0 > 0.0) {
      hi = lo;
      fhi = flo;
      lo = guess - step;
      flo = F(lo);
    } else {
      lo = hi;
      flo = fhi;
      hi = guess + step;
      fhi = F(hi);
    }
    if (!std::isfinite(flo) || !std::isfinite(fhi))
      throw NumericalError("root solve: non-finite function value while bracketing");
    step *= 2.0;
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  auto tol = [](double a, double b) {
    return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(a) + std::abs(b));
  };
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, tol, iters);
  return std::abs(F(a)) <= std::abs(F(b)) ? a : b;
}

}  // namespace lbds
