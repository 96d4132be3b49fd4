#pragma once

#include <functional>

namespace lbds {

/// Root of a nondecreasing function F, bracketed by expanding around `guess`
/// (at most 60 doublings) and refined with TOMS 748. Throws NumericalError
/// when no sign change is found.
double increasing_root(const std::function<double(double)>& F, double guess);

}  // namespace lbds
