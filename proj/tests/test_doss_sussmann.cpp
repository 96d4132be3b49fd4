#include "doctest.h"

#include <cmath>

#include "lbds/doss_sussmann.hpp"
#include "lbds/error.hpp"
#include "test_models.hpp"

using namespace lbds;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

FlowDriver constant_g(double g0) {
  return {[g0](double, double, double) { return g0; }, [](double, double, double) { return 0.0; }, true};
}

FlowDriver linear_g(double beta) {
  return {[beta](double, double, double y) { return beta * y; }, [beta](double, double, double) { return beta; },
          true};
}

struct Path {
  TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 50);
  std::vector<double> dB;
  std::vector<double> tail;  // B_T - B_t at each node
};

Path brownian_path(std::uint64_t seed) {
  Path out;
  auto chars = testing::poisson();
  auto batch = simulate_batch(chars, build_basis(chars), out.grid, 1, seed);
  out.dB.resize(50);
  out.tail.assign(51, 0.0);
  for (std::size_t i = 0; i < 50; ++i) out.dB[i] = batch.dB(0, i);
  for (std::size_t i = 50; i-- > 0;) out.tail[i] = out.tail[i + 1] + out.dB[i];
  return out;
}

}  // namespace

TEST_CASE("closed-form flows") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto path = brownian_path(seed);
    auto c = flow_chi(constant_g(0.7), path.grid, path.dB, 0.0, 1.3);
    auto l = flow_chi(linear_g(1.0), path.grid, path.dB, 0.0, 1.3);
    FlowDriver zero{[](double, double, double) { return 0.0; }, {}, true};
    auto z = flow_chi(zero, path.grid, path.dB, 0.0, 1.3);
    for (std::size_t i = 0; i <= 50; ++i) {
      CHECK(std::abs(c[i].chi - (1.3 + 0.7 * path.tail[i])) <= 1e-10);
      CHECK(std::abs(l[i].chi - 1.3 * std::exp(path.tail[i])) <= 1e-10);
      CHECK(std::abs(l[i].dchi - std::exp(path.tail[i])) <= 1e-10);
      CHECK(z[i].chi == 1.3);
    }
  }
}

TEST_CASE("flow inverse") {
  auto path = brownian_path(4);
  FlowField cf(constant_g(0.5), path.grid, path.dB, {0.0}, linspace(-6.0, 6.0, 121));
  CHECK(cf.pi(10, 0.0, 0.4) == doctest::Approx(0.4 - 0.5 * path.tail[10]).epsilon(1e-12));
  FlowField zf({[](double, double, double) { return 0.0; }, {}, true}, path.grid, path.dB, {0.0},
               linspace(-2.0, 2.0, 21));
  CHECK(zf.pi(0, 0.0, 0.37) == doctest::Approx(0.37).epsilon(1e-14));
  FlowDriver g{[](double, double x, double y) { return 0.3 * std::sin(y) + 0.1 * x; }, {}, false};
  FlowField gf(g, path.grid, path.dB, linspace(-1.0, 1.0, 9), linspace(-4.0, 4.0, 81));
  auto chk = check_flow(gf, 10);
  CHECK(chk.min_dchi > 0.0);
  CHECK(chk.roundtrip <= 1e-8);
  CHECK(chk.fd_mismatch <= 1e-6);
  CHECK(chk.growth_constant <= 0.5);
  // off-lattice x and y use exact Newton refinement
  const double y = gf.exact(7, 0.33, 0.21).chi;
  CHECK(std::abs(gf.pi(7, 0.33, y) - 0.21) <= 1e-9);
  CHECK(std::abs(gf.chi(7, 0.33, 0.21).chi - y) <= 1e-6);
  CHECK_THROWS_AS(gf.pi(0, 0.0, 1e3), NumericalError);
}

TEST_CASE("transformed coefficients") {
  auto path = brownian_path(5);
  auto none = LevyCharacteristics(1.0, 0.0, 0.0, {}, Modulation::proportional);
  auto nb = MartingaleBasis::empty(none);
  ScalarSigma sigma = [](double) { return 1.0; };
  TestField phi = [](double, double x) { return x * x; };
  ScalarDriverFn f = [](double t, double x, double y, std::span<const double>) { return t + x * y; };
  FlowField zero({[](double, double, double) { return 0.0; }, {}, true}, path.grid, path.dB, {0.0},
                 linspace(-3.0, 3.0, 7));
  ScalarDriverFn f0 = [](double, double, double, std::span<const double>) { return 0.0; };
  CHECK(transformed_f(f0, zero, nb, none, sigma, phi, 5, 0.2, 0.3, 0.1) == 0.0);
  FlowField cf(constant_g(0.4), path.grid, path.dB, {0.0}, linspace(-3.0, 3.0, 7));
  const double t = path.grid.node(5);
  CHECK(transformed_f(f, cf, nb, none, sigma, phi, 5, 0.2, 0.3, 0.1) ==
        doctest::Approx(t + 0.2 * (0.3 + 0.4 * path.tail[5])).epsilon(1e-12));

  auto pois = testing::poisson();
  auto pb = build_basis(pois);
  ScalarSigma small = [](double) { return 0.1; };
  // identity flow: f plus the jump-difference terms of phi
  const double x = 0.2, y = 0.3, z = 0.1;
  const double expected = t + x * y + (phi(t, x + 0.1) - y - z * 0.1) * 2.0;
  CHECK(transformed_f(f, zero, pb, pois, small, phi, 5, x, y, z) == doctest::Approx(expected).epsilon(1e-9));

  auto dom = make_domain({DomainKind::interval, 0.0, 1.0});
  ScalarBoundaryFn h = [](double, double x, double y) { return x - y * y; };
  CHECK(transformed_h(h, zero, dom, 3, 1.0, 0.5) == doctest::Approx(h(0, 1.0, 0.5)));
  CHECK(transformed_h(h, cf, dom, 3, 0.0, 0.5) ==
        doctest::Approx(h(0, 0.0, 0.5 + 0.4 * path.tail[3])).epsilon(1e-12));
  ScalarBoundaryFn h0 = [](double, double, double) { return 0.0; };
  CHECK(transformed_h(h0, zero, dom, 3, 0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(transformed_h(h, zero, dom, 3, 0.5, 0.5), InvalidArgument);
}

TEST_CASE("direct and transformed routes agree") {
  LevyCharacteristics chars(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{-0.5, 1.0}}, Modulation::proportional);
  auto basis = build_basis(chars);
  BatchOptions opt;
  opt.backward_groups = 2;
  auto batch = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, 80), 8000, 21, opt);
  auto fwd = ForwardState::levy(batch);
  RGBDSDEProblem direct;
  direct.terminal = [](const DriverContext& c) { return std::cos(c.x[0]); };
  direct.drivers = zero_drivers();
  direct.drivers.f = [](const DriverContext& c, double, std::span<const double>) { return 0.5 * std::sin(c.x[0]); };
  FlowDriver g{[](double, double, double y) { return 0.3 * y + 0.1 * std::sin(y); },
               [](double, double, double y) { return 0.3 + 0.1 * std::cos(y); }, true};
  direct.drivers.g = [g](const DriverContext& c, double y, std::span<const double>) { return g.value(c.t, 0.0, y); };
  direct.drivers.g_vanishes = false;
  direct.drivers.g_uses_yz = true;
  auto ys = solve_lipschitz(direct, fwd, batch);

  auto flows = tabulate_flows(g, batch, {0.0}, linspace(-6.0, 6.0, 241));
  RGBDSDEProblem tr = direct;
  tr.drivers = transformed_drivers(direct.drivers, g, flows, batch, basis);
  tr.drivers.bounds.lipschitz_y = 2.0;
  auto vs = solve_lipschitz(tr, fwd, batch);
  auto back = flow_restore(vs, flows, batch);
  const double se = std::hypot(ys.Y0_se(), vs.Y0_se());
  for (std::size_t grp = 0; grp < 2; ++grp) {
    double a = 0.0, b = 0.0;
    std::size_t m = 0;
    for (std::size_t p = grp; p < batch.paths(); p += 2) {
      a += ys.Y(p, 0);
      b += back.Y(p, 0);
      ++m;
    }
    a /= static_cast<double>(m);
    b /= static_cast<double>(m);
    MESSAGE("group " << grp << ": direct " << a << " transformed " << b);
    CHECK(std::abs(a - b) <= 3.0 * (se + batch.grid().dt(0)));
  }
}
