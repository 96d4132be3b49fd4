#include "doctest.h"

#include <cmath>

#include "lbds/bdsde_solver.hpp"
#include "lbds/error.hpp"
#include "test_models.hpp"

using namespace lbds;

namespace {

LevyCharacteristics still(double T = 1.0) { return LevyCharacteristics(T, 0.0, 0.0, {}, Modulation::proportional); }

PathBatch still_batch(std::size_t N, std::size_t paths = 1, std::size_t groups = 0) {
  auto c = still();
  BatchOptions opt;
  opt.backward_groups = groups;
  return simulate_batch(c, MartingaleBasis::empty(c), TimeGrid::uniform(0.0, 1.0, N), paths, 17, opt);
}

StateFn constant(double c) {
  return [c](const DriverContext&) { return c; };
}

RGBDSDEProblem linear_problem(double a, double xi) {
  RGBDSDEProblem p;
  p.terminal = constant(xi);
  p.drivers = zero_drivers();
  p.drivers.f = [a](const DriverContext&, double y, std::span<const double>) { return a * y; };
  p.drivers.bounds.lipschitz_y = std::abs(a);
  p.drivers.bounds.lambda = a;
  p.drivers.bounds.phi = std::abs(a);
  return p;
}

}  // namespace

TEST_CASE("Yosida resolvent and regularization") {
  ScalarMap lin = [](double y) { return -y; };
  CHECK(yosida_resolvent(lin, 3.0, 0.5) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(yosida_apply(lin, 3.0, 0.5) == doctest::Approx(-2.0).epsilon(1e-14));
  ScalarMap cubic = [](double y) { return -y * y * y; };
  CHECK(yosida_resolvent(cubic, 0.0, 1.0) == 0.0);
  const double J = yosida_resolvent(cubic, 2.0, 1.0);
  CHECK(std::abs(J + J * J * J - 2.0) <= 1e-12 * 3.0);
  CHECK(J == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(yosida_resolvent(cubic, 1.0, 0.0), InvalidArgument);
  ScalarMap bad = [](double y) { return y * y + 1e6; };
  CHECK_THROWS_AS(yosida_resolvent(bad, 0.0, 1.0), NumericalError);
}

TEST_CASE("truncated generators") {
  DriverFn f = [](const DriverContext&, double y, std::span<const double>) { return y + 5.0; };
  auto fp = truncate_generator(f, 3.0);
  DriverContext ctx;
  CHECK(fp(ctx, 2.0, {}) == doctest::Approx(5.0));
  CHECK(fp(ctx, 0.0, {}) == doctest::Approx(3.0));
  DriverFn g = [](const DriverContext&, double y, std::span<const double>) { return -2.0 * y; };
  auto gp = truncate_generator(g, 1.0);
  CHECK(gp(ctx, 1.7, {}) == g(ctx, 1.7, {}));
  BoundaryFn h = [](const DriverContext&, double y) { return -y - 7.0; };
  CHECK(std::abs(truncate_generator(h, 2.0)(ctx, 0.0)) <= 2.0);
}

TEST_CASE("linear deterministic BDSDE converges at first order") {
  std::vector<double> err;
  for (std::size_t N : {200u, 400u}) {
    auto batch = still_batch(N);
    auto sol = solve_lipschitz(linear_problem(1.0, 1.0), ForwardState::none(batch), batch);
    err.push_back(std::abs(sol.Y(0, 0) - std::exp(1.0)));
  }
  CHECK(err[0] <= 0.01);
  CHECK(err[0] / err[1] >= 1.7);
  CHECK(err[0] / err[1] <= 2.3);
}

TEST_CASE("trivial solutions") {
  auto chars = testing::poisson();
  auto batch = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 20), 2000, 4);
  RGBDSDEProblem p;
  p.terminal = constant(1.5);
  p.drivers = zero_drivers();
  auto sol = solve_lipschitz(p, ForwardState::levy(batch), batch);
  for (std::size_t q = 0; q < 2000; q += 97)
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(std::abs(sol.Y(q, i) - 1.5) <= 1e-10);
      CHECK(std::abs(sol.Z(q, i)[0]) < 1e-10);
    }

  auto pb = still_batch(30, 50, 0);
  RGBDSDEProblem gp;
  gp.terminal = constant(0.7);
  gp.drivers = zero_drivers();
  gp.drivers.g = [](const DriverContext&, double, std::span<const double>) { return 0.4; };
  gp.drivers.g_vanishes = false;
  auto gs = solve_lipschitz(gp, ForwardState::none(pb), pb);
  for (std::size_t q = 0; q < 50; ++q) {
    double tail = 0.0;
    for (std::size_t i = 30; i-- > 0;) {
      tail += pb.dB(q, i);
      CHECK(gs.Y(q, i) == doctest::Approx(0.7 + 0.4 * tail).epsilon(1e-12));
    }
  }
}

TEST_CASE("deterministic decreasing obstacle") {
  const double s0 = 0.8;
  auto batch = still_batch(50);
  RGBDSDEProblem p;
  p.terminal = constant(0.0);
  p.drivers = zero_drivers();
  p.obstacle = [s0](const DriverContext& c) { return s0 * (1.0 - c.t); };
  auto sol = solve_reflected(p, ForwardState::none(batch), batch);
  for (std::size_t i = 0; i <= 50; ++i) {
    const double t = batch.grid().node(i);
    CHECK(std::abs(sol.Y(0, i) - s0 * (1.0 - t)) <= 1e-12);
    CHECK(std::abs(sol.K(0, i) - s0 * t) <= 1e-12);
  }
  CHECK(sol.diagnostics.skorokhod_node == 0.0);
  CHECK(sol.diagnostics.min_push >= 0.0);

  RGBDSDEProblem low = linear_problem(0.5, 1.0);
  auto chars = testing::poisson();
  auto sb = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 20), 1000, 9);
  auto fwd = ForwardState::levy(sb);
  auto plain = solve_lipschitz(low, fwd, sb);
  low.obstacle = constant(-1e6);
  auto refl = solve_reflected(low, fwd, sb);
  bool equal = true;
  for (std::size_t q = 0; q < 1000; ++q)
    for (std::size_t i = 0; i <= 20; ++i) equal = equal && plain.Y(q, i) == refl.Y(q, i) && refl.K(q, i) == 0.0;
  CHECK(equal);

  RGBDSDEProblem wrong;
  wrong.terminal = constant(0.0);
  wrong.drivers = zero_drivers();
  wrong.obstacle = constant(1.0);
  CHECK_THROWS_AS(solve_reflected(wrong, ForwardState::none(batch), batch), InvalidArgument);
}

TEST_CASE("implicit step conditions") {
  auto batch = still_batch(2);
  auto p = linear_problem(-3.0, 1.0);
  p.drivers.monotone = false;
  CHECK_THROWS_AS(solve_lipschitz(p, ForwardState::none(batch), batch), InvalidArgument);
  p.drivers.monotone = true;
  auto sol = solve_lipschitz(p, ForwardState::none(batch), batch);
  CHECK(sol.Y(0, 0) == doctest::Approx(1.0 / (2.5 * 2.5)).epsilon(1e-13));
}

TEST_CASE("Picard shortcut and weighted norms") {
  auto batch = still_batch(10, 4);
  auto fwd = ForwardState::none(batch);
  RGBDSDEProblem p = linear_problem(-1.0, 0.0);
  auto sol = picard_solve(p, fwd, batch);
  CHECK(sol.diagnostics.iterations == 1);
  CHECK(sol.diagnostics.picard_residuals == std::vector<double>{0.0});
  DriverBounds b;
  b.phi = 1.0;  // a^2 = 2
  WeightProcess w(b, fwd, batch.grid(), 1.0, 1.0, 1e-3);
  CHECK(weighted_norms(sol, w, fwd, batch).total() == 0.0);
  SolutionGrid ones(4, 10, 0);
  for (std::size_t q = 0; q < 4; ++q)
    for (std::size_t i = 0; i <= 10; ++i) ones.Y(q, i) = 1.0;
  CHECK(weighted_norms(ones, w, fwd, batch).S2 == doctest::Approx(std::exp(2.0)));
  DriverBounds zero;
  CHECK_THROWS_AS(WeightProcess(zero, fwd, batch.grid(), 1.0, 1.0, 1e-3), InvalidArgument);
}

TEST_CASE("a priori check") {
  auto batch = still_batch(10, 4);
  auto fwd = ForwardState::none(batch);
  RGBDSDEProblem p;
  p.terminal = constant(0.0);
  p.drivers = zero_drivers();
  p.drivers.bounds.varphi = 0.0;
  p.drivers.bounds.psi = 0.0;
  p.drivers.bounds.phi = 1.0;
  auto sol = solve_lipschitz(p, fwd, batch);
  WeightProcess w(p.drivers.bounds, fwd, batch.grid(), 7.0, 1.0, 1e-3);
  auto rep = apriori_check(p, sol, w, fwd, batch);
  CHECK(rep.trivial);
  p.drivers.bounds.alpha = 0.25;
  WeightProcess w4(p.drivers.bounds, fwd, batch.grid(), 4.0, 1.0, 1e-3);
  CHECK_THROWS_AS(apriori_check(p, sol, w4, fwd, batch), InvalidArgument);
}

TEST_CASE("comparison of ordered problems") {
  auto batch = still_batch(100, 2);
  auto fwd = ForwardState::none(batch);
  auto p1 = linear_problem(1.0, 0.0);
  auto p2 = linear_problem(1.0, 1.0);
  auto same = compare_solutions(p1, p1, fwd, batch);
  CHECK(same.violation_fraction == 0.0);
  auto rep = compare_solutions(p1, p2, fwd, batch);
  CHECK(rep.violation_fraction == 0.0);
  CHECK(rep.min_gap >= 0.0);
  CHECK(rep.y0_gap == doctest::Approx(std::exp(1.0)).epsilon(0.01));
  CHECK_THROWS_AS(compare_solutions(p2, p1, fwd, batch), InvalidArgument);
}

TEST_CASE("exponential change of variables") {
  auto chars = testing::poisson();
  auto batch = simulate_batch(chars, build_basis(chars), TimeGrid::uniform(0.0, 1.0, 400), 2, 2);
  auto fwd = ForwardState::none(batch).with_kappa(batch.grid(), [](double t) { return 0.5 * t * t; });
  RGBDSDEProblem p;
  p.terminal = constant(1.0);
  p.drivers = zero_drivers();
  p.drivers.f = [](const DriverContext&, double y, std::span<const double>) { return 0.5 * y + 1.0; };
  p.drivers.h = [](const DriverContext&, double y) { return 0.3 * y - 0.2; };
  p.drivers.bounds.lipschitz_y = 0.5;
  auto direct = solve_lipschitz(p, fwd, batch);
  auto changed = exponential_change(p, 0.5, 0.3);
  auto back = exponential_restore(solve_lipschitz(changed, fwd, batch), 0.5, 0.3, fwd, batch);
  CHECK(back.Y(0, 0) == doctest::Approx(direct.Y(0, 0)).epsilon(5e-3));
  CHECK(back.Y(1, 200) == doctest::Approx(direct.Y(1, 200)).epsilon(5e-3));
}

TEST_CASE("driver bound probes") {
  DriverSet d = zero_drivers();
  d.f = [](const DriverContext&, double y, std::span<const double>) { return -y * y * y; };
  d.bounds.lambda = 0.0;
  d.bounds.lipschitz_y = 12.0;
  d.bounds.varphi = 1.0;
  d.bounds.phi = 4.0;
  ProbeBox box;
  CHECK_NOTHROW(check_driver_bounds(d, box, 1000, 1));
  d.bounds.phi = 1.0;
  CHECK_THROWS_AS(check_driver_bounds(d, box, 1000, 1), InvalidArgument);
}

TEST_CASE("backward residual has zero mean and Z recovers the martingale part") {
  LevyCharacteristics chars(1.0, 0.0, 0.0, {JumpAtom{1.0, 2.0}, JumpAtom{-0.5, 1.0}}, Modulation::proportional);
  auto basis = build_basis(chars);
  auto batch = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, 20), 20000, 6);
  auto fwd = ForwardState::levy(batch);
  RGBDSDEProblem p;
  p.terminal = [](const DriverContext& c) { return c.x[0]; };
  p.drivers = zero_drivers();
  p.drivers.f = [](const DriverContext&, double y, std::span<const double> z) { return -0.5 * y + 0.2 * z[0]; };
  p.drivers.f_uses_z = true;
  p.drivers.bounds.lipschitz_y = 0.5;
  auto sol = solve_lipschitz(p, fwd, batch);
  auto st = backward_residuals(p, sol, fwd, batch);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(st.mean[i]) <= 3.0 * st.se[i] + 1e-12);
  // with f = 0 and xi = L_T, Y_t = L_t + m1(T) - m1(t) and Z = p-projection of e
  RGBDSDEProblem q;
  q.terminal = [](const DriverContext& c) { return c.x[0]; };
  q.drivers = zero_drivers();
  auto qs = solve_lipschitz(q, fwd, batch);
  const auto proj = project_on_basis(basis, chars, [](double, double e) { return e; }, 0.5);
  for (std::size_t k = 0; k < basis.dimension(); ++k)
    CHECK(std::abs(qs.Z(3, 10)[k] - proj(static_cast<Eigen::Index>(k))) <= 0.06);
}
