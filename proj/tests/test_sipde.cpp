#include "doctest.h"

#include <cmath>

#include "lbds/error.hpp"
#include "lbds/sipde.hpp"
#include "test_models.hpp"

using namespace lbds;

namespace {

SIPDEProblem jump_model() {
  SIPDEProblem p{LevyCharacteristics(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}}, Modulation::proportional)};
  p.sigma = [](double x) { return 0.5 * (1.0 - x); };
  p.drivers = zero_drivers();
  p.terminal = [](double) { return 0.7; };
  return p;
}

}  // namespace

TEST_CASE("SIPDE validation") {
  auto p = jump_model();
  CHECK_NOTHROW(validate_sipde(p));
  SIPDEProblem big{LevyCharacteristics(1.0, 0.0, 0.0, {JumpAtom{2.0, 1.0}}, Modulation::proportional)};
  big.sigma = p.sigma;
  big.terminal = p.terminal;
  CHECK_THROWS_AS(validate_sipde(big), InvalidArgument);
  SIPDEProblem diff{testing::brownian()};
  diff.sigma = p.sigma;
  diff.terminal = p.terminal;
  CHECK_THROWS_AS(validate_sipde(diff), InvalidArgument);
  auto high = p;
  high.obstacle = [](double, double) { return 1.0; };
  CHECK_THROWS_AS(validate_sipde(high), InvalidArgument);
  auto leave = p;
  leave.sigma = [](double) { return 0.5; };
  CHECK_THROWS_AS(validate_sipde(leave), InvalidArgument);
}

TEST_CASE("generator and u1k terms") {
  SIPDEProblem p{LevyCharacteristics(1.0, 0.0, 0.0, {JumpAtom{1.0, 2.0}}, Modulation::proportional)};
  p.domain = SmoothDomain::interval(-3.0, 3.0);
  p.sigma = [](double) { return 1.0; };
  auto sq = Profile::from([](double x) { return x * x; }, -3.0, 3.0, 61);
  CHECK(generator_apply(p, sq, 0.5, 0.4) == doctest::Approx(2.0).epsilon(1e-10));
  auto basis = build_basis(p.chars);
  CHECK(u1k_terms(p, basis, sq, 0.5, 0.4)[0] == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-10));
  auto affine = Profile::from([](double x) { return 1.0 + x; }, -3.0, 3.0, 61);
  CHECK(std::abs(u1k_terms(p, basis, affine, 0.5, 0.4)[0]) < 1e-12);
  SIPDEProblem q{LevyCharacteristics(1.0, 0.3, 0.0, {JumpAtom{1.0, 2.0}}, Modulation::proportional)};
  q.domain = p.domain;
  q.sigma = [](double) { return 0.5; };
  CHECK(generator_apply(q, affine, 0.5, 0.4) == doctest::Approx(0.3 * 0.5 * 1.0).epsilon(1e-12));
  auto flat = Profile::from([](double) { return 4.0; }, -3.0, 3.0, 61);
  CHECK(std::abs(generator_apply(q, flat, 0.5, 0.4)) < 1e-14);
  CHECK_THROWS_AS(generator_apply(p, sq, 0.5, 2.5), InvalidArgument);
}

TEST_CASE("trivial representations") {
  auto p = jump_model();
  MonteCarloConfig mc;
  mc.paths = 500;
  mc.steps = 20;
  auto u = mc_representation(p, {0.0, 0.5, 1.0}, {0.0, 0.4, 1.0}, mc);
  for (double v : u.u) CHECK(std::abs(v - 0.7) <= 1e-12);
  p.terminal = [](double) { return 0.0; };
  p.obstacle = [](double t, double) { return 0.6 * (1.0 - t); };
  auto s = mc_representation(p, {0.0, 0.5}, {0.2, 0.9}, mc);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(s.at(i, j) - 0.6 * (1.0 - s.t[i])) <= 1e-12);
}

TEST_CASE("finite-difference oracle") {
  auto p = jump_model();
  FDConfig cfg;
  cfg.space_cells = 50;
  cfg.time_steps = 50;
  auto u = fd_obstacle_solve(p, cfg);
  for (double v : u.u) CHECK(std::abs(v - 0.7) <= 1e-12);
  p.obstacle = [](double, double) { return 0.9; };
  p.terminal = [](double) { return 1.0; };
  p.drivers.f = [](const DriverContext&, double, std::span<const double>) { return -1.0; };
  auto o = fd_obstacle_solve(p, cfg);
  CHECK(o.interpolate(0.0, 0.5) == doctest::Approx(0.9));
  CHECK(o.interpolate(0.95, 0.5) == doctest::Approx(0.95));
  p.drivers.g = [](const DriverContext&, double y, std::span<const double>) { return y; };
  p.drivers.g_vanishes = false;
  CHECK_THROWS_AS(fd_obstacle_solve(p, cfg), InvalidArgument);
}

TEST_CASE("comparison report") {
  SolutionField a;
  a.t = {0.0, 1.0};
  a.x = {0.0, 1.0};
  a.u = {1, 2, 3, 4};
  a.se = {0, 0, 0, 0};
  auto same = compare_report(a, a, 0.0);
  CHECK(same.pass);
  CHECK(same.max_diff == 0.0);
  auto b = a;
  for (auto& v : b.u) v += 0.5;
  auto shift = compare_report(a, b, 0.1);
  CHECK_FALSE(shift.pass);
  for (const auto& pt : shift.points) CHECK(pt.diff == doctest::Approx(0.5));
  CHECK(a.interpolate(0.5, 0.5) == doctest::Approx(2.5));
  CHECK(a.continuity_modulus() == doctest::Approx(2.0));
}
