#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lbds {

struct RegressionOptions {
  int degree = 2;
  /// Relative threshold of the complete orthogonal decomposition.
  double rank_threshold = 1e-10;
  /// Paths per block of the normal-equation reduction.
  std::size_t block = 4096;
};

/// Least-squares projection of each target column onto polynomials (total
/// degree <= options.degree) of the standardized state, fitted separately on
/// each group of paths. state is n x l (l may be 0), targets n x m, group has
/// n entries or is empty (one pooled group). Coordinates that are constant
/// within a group are dropped. Returns the fitted n x m values.
///
/// Throws NumericalError when a group has fewer paths than features.
Eigen::MatrixXd conditional_expectation(const Eigen::MatrixXd& state,
                                        std::span<const std::size_t> group,
                                        const Eigen::MatrixXd& targets,
                                        const RegressionOptions& options = {});

/// Single-threaded reference; bit-identical to conditional_expectation.
Eigen::MatrixXd conditional_expectation_serial(const Eigen::MatrixXd& state,
                                               std::span<const std::size_t> group,
                                               const Eigen::MatrixXd& targets,
                                               const RegressionOptions& options = {});

/// Exponent vectors of all monomials in `vars` variables of total degree <= degree,
/// constant term first.
std::vector<std::vector<int>> monomial_exponents(std::size_t vars, int degree);

}  // namespace lbds
