#include "doctest.h"

#include <cmath>

#include "lbds/error.hpp"
#include "lbds/regression.hpp"
#include "lbds/rng.hpp"

using namespace lbds;

TEST_CASE("monomial exponents") {
  CHECK(monomial_exponents(0, 2).size() == 1);
  CHECK(monomial_exponents(1, 2).size() == 3);
  CHECK(monomial_exponents(2, 2).size() == 6);
  CHECK(monomial_exponents(3, 3).size() == 20);
  CHECK(monomial_exponents(2, 2).front() == std::vector<int>{0, 0});
}

TEST_CASE("quadratic targets are reproduced exactly") {
  const Eigen::Index n = 500;
  Eigen::MatrixXd x(n, 2), y(n, 2);
  CounterRng rng(1, 0, 0, StreamTag::probe);
  for (Eigen::Index p = 0; p < n; ++p) {
    x(p, 0) = rng.normal();
    x(p, 1) = 3.0 + rng.uniform();
    y(p, 0) = 1.0 + 2.0 * x(p, 0) - x(p, 0) * x(p, 1) + 0.5 * x(p, 1) * x(p, 1);
    y(p, 1) = -4.0;
  }
  auto fit = conditional_expectation(x, {}, y);
  CHECK((fit - y).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("groups are fitted separately and constant coordinates drop out") {
  const Eigen::Index n = 600;
  Eigen::MatrixXd x(n, 1), y(n, 1);
  std::vector<std::size_t> g(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    g[static_cast<std::size_t>(p)] = static_cast<std::size_t>(p % 3);
    x(p, 0) = static_cast<double>(p % 3);  // constant inside each group
    y(p, 0) = static_cast<double>(p % 3) * 10.0 + static_cast<double>(p % 2);
  }
  auto fit = conditional_expectation(x, g, y);
  for (Eigen::Index p = 0; p < n; ++p) CHECK(fit(p, 0) == doctest::Approx(static_cast<double>(p % 3) * 10.0 + 0.5));
}

TEST_CASE("parallel and serial regressions agree bit for bit") {
  const Eigen::Index n = 20000;
  Eigen::MatrixXd x(n, 2), y(n, 3);
  CounterRng rng(2, 0, 0, StreamTag::probe);
  for (Eigen::Index p = 0; p < n; ++p) {
    x(p, 0) = rng.normal();
    x(p, 1) = rng.uniform();
    for (int c = 0; c < 3; ++c) y(p, c) = std::sin(x(p, 0) * (c + 1)) + rng.normal();
  }
  RegressionOptions opt;
  opt.degree = 3;
  opt.block = 1024;
  CHECK((conditional_expectation(x, {}, y, opt) - conditional_expectation_serial(x, {}, y, opt)).cwiseAbs().maxCoeff() == 0.0);
  std::vector<std::size_t> g(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < g.size(); ++p) g[p] = p % 7;
  CHECK((conditional_expectation(x, g, y, opt) - conditional_expectation_serial(x, g, y, opt)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank deficiency is reported") {
  Eigen::MatrixXd x(4, 2), y(4, 1);
  x << 0, 1, 1, 3, 2, 2, 5, 0;
  y.setOnes();
  CHECK_THROWS_AS(conditional_expectation(x, {}, y), NumericalError);
}
