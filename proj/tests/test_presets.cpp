#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "lbds/error.hpp"
#include "lbds/presets.hpp"

using namespace lbds;

TEST_CASE("linear preset evaluates and reports bounds") {
  const auto d = DriverSpec::linear(-0.5, 0.3, {0.2, -0.1}, 2.0);
  const std::vector<double> z{1.0, 4.0};
  CHECK(d(0.25, 2.0, z) == doctest::Approx(-1.0 + 0.3 + 0.2 - 0.4 + 0.5));
  CHECK(d.dy(0.0, 7.0, z) == doctest::Approx(-0.5));
  CHECK(d.degree() == 1);
  CHECK(d.uses_y());
  CHECK(d.uses_z());
  CHECK(d.nonincreasing());
  CHECK(d.sup_slope() == doctest::Approx(-0.5));
  CHECK(d.lipschitz() == doctest::Approx(0.5));
}

TEST_CASE("zero preset vanishes") {
  const auto d = DriverSpec::zero();
  CHECK(d.vanishes());
  CHECK_FALSE(d.uses_y());
  CHECK_FALSE(d.uses_z());
  CHECK(d.degree() == -1);
  CHECK(d(1.0, 3.0, {}) == 0.0);
}

TEST_CASE("cubic monotone preset") {
  const auto d = DriverSpec::cubic_monotone(1.0, 0.5, 0.2);
  for (double y : {-2.0, -0.3, 0.0, 1.7}) {
    CHECK(d(0.0, y, {}) == doctest::Approx(0.2 - 0.5 * y - y * y * y));
    CHECK(d.dy(0.0, y, {}) == doctest::Approx(-0.5 - 3.0 * y * y));
  }
  CHECK(d.nonincreasing());
  CHECK(d.sup_slope() == doctest::Approx(-0.5));
  CHECK(std::isinf(d.lipschitz()));
  CHECK_THROWS_AS(DriverSpec::cubic_monotone(-1.0), InvalidArgument);
}

TEST_CASE("capped preset clamps and zeroes the slope on the cap") {
  const auto d = DriverSpec::capped(2.0, 0.0, 1.0);
  CHECK(d(0.0, 0.25, {}) == doctest::Approx(0.5));
  CHECK(d(0.0, 3.0, {}) == doctest::Approx(1.0));
  CHECK(d(0.0, -3.0, {}) == doctest::Approx(-1.0));
  CHECK(d.dy(0.0, 3.0, {}) == 0.0);
  CHECK(d.dy(0.0, 0.1, {}) == doctest::Approx(2.0));
}

TEST_CASE("polynomial preset with an increasing part is not monotone") {
  const auto d = DriverSpec::polynomial({0.0, 0.0, 1.0});
  CHECK(d.degree() == 2);
  CHECK_FALSE(d.nonincreasing());
  CHECK(std::isinf(d.sup_slope()));
}

TEST_CASE("driver names round trip") {
  for (auto k : {DriverSpec::Kind::zero, DriverSpec::Kind::linear, DriverSpec::Kind::cubic_monotone,
                 DriverSpec::Kind::capped, DriverSpec::Kind::polynomial})
    CHECK(driver_kind(to_string(k)) == k);
  CHECK_THROWS_AS(driver_kind("quartic"), InvalidArgument);
}

TEST_CASE("field polynomial in t and x") {
  const FieldSpec s{{{0.5, 0, 0}, {-0.5, 1, 0}, {-0.5, 0, 1}, {0.5, 1, 1}}};
  for (double t : {0.0, 0.4, 1.0})
    for (double x : {0.0, 0.3, 1.0}) CHECK(s(t, x) == doctest::Approx(0.5 * (1.0 - t) * (1.0 - x)));
  CHECK(FieldSpec{}(0.3, 0.2) == 0.0);
}

TEST_CASE("make_drivers derives monotonicity and growth constants") {
  ProblemSpec spec;
  spec.f = DriverSpec::linear(-1.0, 0.2, {0.5}, 1.0);
  spec.g = DriverSpec::linear(0.3);
  const auto ds = make_drivers(spec, 2.0, 0.5);
  CHECK(ds.bounds.lambda == doctest::Approx(-1.0));
  CHECK(ds.bounds.lipschitz_y == doctest::Approx(1.0));
  CHECK(ds.bounds.eta == doctest::Approx(1.0));
  CHECK(ds.bounds.varphi == doctest::Approx(0.2 + 2.0));
  CHECK(ds.bounds.rho == doctest::Approx(0.09));
  CHECK_FALSE(ds.g_vanishes);
  CHECK(ds.g_uses_yz);
}

TEST_CASE("weight rate ignores unbounded parts and respects the floor") {
  DriverBounds b;
  b.lambda = -1.0;
  b.phi = std::numeric_limits<double>::infinity();
  b.rho = 0.25;
  b.eta = 0.5;
  CHECK(weight_rate(b, 1e-6) == doctest::Approx(1.0 + 0.25 + 0.25));
  DriverBounds zero;
  zero.lambda = 0.0;
  zero.phi = zero.rho = zero.eta = 0.0;
  CHECK(weight_rate(zero, 1e-3) == doctest::Approx(1e-3));
}

TEST_CASE("acceptance SIPDE model is well posed") {
  const auto p = models::sipde(true);
  const auto chk = validate_sipde(p);
  CHECK(chk.max_terminal_gap <= 0.0);
  CHECK(p.terminal(0.5) == doctest::Approx(0.25));
  CHECK(p.obstacle(0.0, 0.0) == doctest::Approx(0.5));
}
