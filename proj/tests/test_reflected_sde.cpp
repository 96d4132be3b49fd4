#include "doctest.h"

#include <cmath>

#include "lbds/error.hpp"
#include "lbds/reflected_sde.hpp"
#include "test_models.hpp"

using namespace lbds;

TEST_CASE("domain presets") {
  auto iv = make_domain({DomainKind::interval, 0.0, 1.0});
  std::vector<double> g(1);
  iv.grad_psi(std::vector<double>{0.0}, g);
  CHECK(g[0] == doctest::Approx(1.0));
  iv.grad_psi(std::vector<double>{1.0}, g);
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(iv.psi(std::vector<double>{0.5}) > 0.0);
  CHECK_THROWS_AS(make_domain({DomainKind::interval, 1.0, 1.0}), InvalidArgument);

  DomainSpec bs;
  bs.kind = DomainKind::ball;
  bs.center = {0.0, 0.0};
  bs.radius = 1.0;
  auto ball = make_domain(bs);
  std::vector<double> x{0.6, 0.8}, gb(2);
  ball.grad_psi(x, gb);
  CHECK(gb[0] == doctest::Approx(-0.6));
  CHECK(gb[1] == doctest::Approx(-0.8));
  bs.radius = 0.0;
  CHECK_THROWS_AS(make_domain(bs), InvalidArgument);

  auto rep = check_interior_sphere(iv, 1000, 4);
  CHECK(rep.violations == 0);
  CHECK(check_interior_sphere(ball, 1000, 4).violations == 0);
}

TEST_CASE("reflection steps") {
  auto iv = make_domain({DomainKind::interval, 0.0, 1.0});
  auto s = step_reflect(iv, std::vector<double>{0.5}, std::vector<double>{-0.2});
  CHECK(s.point[0] == doctest::Approx(0.3));
  CHECK(s.dkappa == 0.0);
  s = step_reflect(iv, std::vector<double>{0.1}, std::vector<double>{-0.3});
  CHECK(s.point[0] == 0.0);
  CHECK(s.dkappa == doctest::Approx(0.2));
  DomainSpec bs;
  bs.kind = DomainKind::ball;
  bs.center = {0.0};
  bs.radius = 1.0;
  auto b1 = make_domain(bs);
  s = step_reflect(b1, std::vector<double>{0.9}, std::vector<double>{0.3});
  CHECK(s.point[0] == doctest::Approx(1.0));
  CHECK(s.dkappa == doctest::Approx(0.2));
  CHECK_THROWS_AS(step_reflect(b1, std::vector<double>{0.9}, std::vector<double>{2.0}), NumericalError);
  bs.center = {0.0, 0.0};
  auto b2 = make_domain(bs);
  s = step_reflect(b2, std::vector<double>{0.0, 0.9}, std::vector<double>{0.0, 0.3});
  CHECK(s.point[1] == doctest::Approx(1.0));
  CHECK(s.dkappa == doctest::Approx(0.2));
}

TEST_CASE("deterministic drift clamp") {
  const double b = -1.0, sigma0 = 0.5, x0 = 0.2;
  LevyCharacteristics chars(1.0, b, 0.0, {}, Modulation::proportional);
  auto batch = simulate_batch(chars, MartingaleBasis::empty(chars), TimeGrid::uniform(0.0, 1.0, 40), 3, 1);
  auto iv = make_domain({DomainKind::interval, 0.0, 1.0});
  auto refl = solve_paths(iv, chars, constant_sigma({sigma0}), {0, {x0}}, batch);
  for (std::size_t node = 0; node <= 40; ++node) {
    const double s = batch.grid().node(node);
    CHECK(refl.X(1, node)[0] == doctest::Approx(std::max(x0 + sigma0 * b * s, 0.0)).epsilon(1e-12));
    CHECK(std::abs(refl.kappa(1, node) - std::max(sigma0 * std::abs(b) * s - x0, 0.0)) <= 1e-12);
  }
  auto still = solve_paths(iv, chars, constant_sigma({0.0}), {0, {x0}}, batch);
  CHECK(still.X(2, 40)[0] == x0);
  CHECK(still.kappa(2, 40) == 0.0);
}

TEST_CASE("jump invariance") {
  auto iv = make_domain({DomainKind::interval, 0.0, 1.0});
  LevyCharacteristics chars(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}}, Modulation::proportional);
  SigmaField shrink = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * (1.0 - x[0]); };
  CHECK_NOTHROW(validate_jump_invariance(iv, chars, shrink));
  CHECK_THROWS_AS(validate_jump_invariance(iv, chars, constant_sigma({0.5})), InvalidArgument);
  auto batch = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 10), 50, 3);
  CHECK_THROWS_AS(solve_paths(iv, chars, constant_sigma({0.8}), {0, {0.5}}, batch), NumericalError);
}

TEST_CASE("reflected jump paths: invariance, complementarity, serial reference") {
  LevyCharacteristics chars(1.0, -3.0, 0.3, {JumpAtom{1.0, 2.0}}, Modulation::proportional);
  auto basis = build_basis(chars);
  auto batch = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, 50), 2000, 8);
  auto iv = make_domain({DomainKind::interval, -1.0, 1.0});
  SigmaField sigma = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * (1.0 - x[0]); };
  validate_jump_invariance(iv, chars, sigma);
  auto refl = solve_paths(iv, chars, sigma, {0, {0.3}}, batch);
  auto serial = solve_paths_serial(iv, chars, sigma, {0, {0.3}}, batch);
  CHECK(refl.X_data() == serial.X_data());
  CHECK(refl.kappa_data() == serial.kappa_data());
  auto rep = complementarity(iv, refl);
  CHECK(rep.min_psi >= -1e-12);
  CHECK(rep.off_boundary_kappa == 0.0);
  CHECK(rep.active_intervals > 0);
  for (std::size_t p = 0; p < 100; ++p)
    for (std::size_t i = 0; i < 50; ++i) CHECK(refl.kappa(p, i + 1) >= refl.kappa(p, i));
  auto mom = reflected_moments(refl, 4.0, 1.0);
  CHECK(std::isfinite(mom.sup_abs_pow_mean));
  CHECK(std::isfinite(mom.exp_kappa_mean));
  CHECK(mom.sup_abs_pow_mean <= 1.0);
}

TEST_CASE("ball paths stay in the closed ball") {
  LevyCharacteristics chars(1.0, 0.5, 1.0, {}, Modulation::proportional);
  auto batch = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 100), 500, 12);
  DomainSpec bs;
  bs.kind = DomainKind::ball;
  bs.center = {0.0, 0.0};
  bs.radius = 1.0;
  auto ball = make_domain(bs);
  auto refl = solve_paths(ball, chars, constant_sigma({0.6, 0.8}), {0, {0.0, 0.0}}, batch);
  auto rep = complementarity(ball, refl);
  CHECK(rep.min_psi >= -1e-12);
  CHECK(rep.off_boundary_kappa == 0.0);
}

TEST_CASE("start node holds the initial point") {
  LevyCharacteristics chars(1.0, 0.0, 1.0, {}, Modulation::proportional);
  auto batch = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 10), 5, 2);
  auto iv = make_domain({DomainKind::interval, 0.0, 1.0});
  auto refl = solve_paths(iv, chars, constant_sigma({0.3}), {4, {0.5}}, batch);
  for (std::size_t node = 0; node <= 4; ++node) CHECK(refl.X(0, node)[0] == 0.5);
  CHECK(refl.X(0, 5)[0] != 0.5);
}

TEST_CASE("continuity in the starting point") {
  LevyCharacteristics chars(1.0, 0.0, 0.5, {JumpAtom{0.5, 2.0}}, Modulation::proportional);
  auto basis = build_basis(chars);
  auto iv = make_domain({DomainKind::interval, -2.0, 2.0});
  SigmaField sigma = [](std::span<const double> x, std::span<double> out) { out[0] = 0.3 + 0.1 * std::sin(x[0]); };
  std::vector<double> fitted;
  for (std::size_t N : {40u, 80u}) {
    auto batch = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, N), 2000, 31);
    auto base = solve_paths(iv, chars, sigma, {0, {0.0}}, batch);
    double cmax = 0.0;
    for (double h : {0.05, 0.1, 0.2}) {
      auto moved = solve_paths(iv, chars, sigma, {0, {h}}, batch);
      double acc = 0.0;
      for (std::size_t p = 0; p < batch.paths(); ++p) {
        double sup = 0.0;
        for (std::size_t node = 0; node <= N; ++node)
          sup = std::max(sup, std::abs(moved.X(p, node)[0] - base.X(p, node)[0]));
        acc += sup * sup;
      }
      cmax = std::max(cmax, acc / static_cast<double>(batch.paths()) / (h * h));
    }
    fitted.push_back(cmax);
  }
  CHECK(fitted[1] <= 2.0 * fitted[0]);
  CHECK(fitted[0] <= 2.0 * fitted[1]);
}

TEST_CASE("truncating small jumps") {
  LevyCharacteristics chars(1.0, 0.1, 0.0, {JumpAtom{0.05, 4.0}, JumpAtom{0.5, 1.0}, JumpAtom{-0.3, 2.0}},
                            Modulation::proportional);
  auto t10 = truncate_small_jumps(chars, 10);
  CHECK(t10.atoms().size() == 2);
  auto t1 = truncate_small_jumps(chars, 1);
  CHECK(t1.atoms().empty());
  CHECK(truncate_small_jumps(chars, 100).atoms().size() == 3);
  CHECK_THROWS_AS(truncate_small_jumps(chars, 0), InvalidArgument);

  // coupled seeds: the truncated paths approach the full ones
  auto iv = make_domain({DomainKind::interval, -5.0, 5.0});
  auto grid = TimeGrid::uniform(0.0, 1.0, 20);
  auto full = simulate_batch(chars, build_basis(chars), grid, 2000, 5);
  auto xf = solve_paths(iv, chars, constant_sigma({1.0}), {0, {0.0}}, full);
  double prev = 1e300;
  for (std::size_t n : {2u, 4u, 25u}) {
    auto tc = truncate_small_jumps(chars, n);
    MartingaleBasis tb = tc.atoms().empty() ? MartingaleBasis::empty(tc) : build_basis(tc);
    auto tbatch = simulate_batch(tc, tb, grid, 2000, 5);
    auto xt = solve_paths(iv, tc, constant_sigma({1.0}), {0, {0.0}}, tbatch);
    double dist = 0.0;
    for (std::size_t p = 0; p < 2000; ++p) {
      double sup = 0.0;
      for (std::size_t node = 0; node <= 20; ++node) sup = std::max(sup, std::abs(xt.X(p, node)[0] - xf.X(p, node)[0]));
      dist += sup / 2000.0;
    }
    CHECK(dist <= prev);
    prev = dist;
  }
  CHECK(prev == doctest::Approx(0.0));
}
