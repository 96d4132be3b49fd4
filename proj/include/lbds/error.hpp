#pragma once

#include <stdexcept>
#include <string>

namespace lbds {

/// Bad input: malformed configuration, violated precondition, invalid model.
/// The CLI maps it to exit status 2.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed on valid input (non-convergence, rank loss,
/// stability bound). The CLI maps it to exit status 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbds
