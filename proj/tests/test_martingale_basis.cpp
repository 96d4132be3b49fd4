#include "doctest.h"

#include <cmath>

#include "lbds/error.hpp"
#include "lbds/martingale_basis.hpp"
#include "test_models.hpp"

using namespace lbds;

namespace {

double pi0_inner(const MartingaleBasis& b, std::size_t n, std::size_t m) {
  double s = 0.0;
  for (const auto& a : b.reference_measure()) s += b.q(n, a.location) * b.q(m, a.location) * a.weight;
  return s;
}

}  // namespace

TEST_CASE("Poisson basis") {
  auto b = build_basis(testing::poisson());
  REQUIRE(b.dimension() == 1);
  CHECK(b.q(0, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(b.p(0, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(b.gamma(0, 0.4) == doctest::Approx(1.0));
  CHECK(b.alpha()(0, 0) > 0.0);
}

TEST_CASE("symmetric two-atom basis") {
  auto b = build_basis(testing::two_atom());
  REQUIRE(b.dimension() == 2);
  CHECK(b.q(0, 0.3) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(std::abs(b.alpha()(1, 0)) < 1e-14);
  CHECK(b.alpha()(1, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t m = 0; m < 2; ++m) CHECK(std::abs(pi0_inner(b, n, m) - (n == m)) <= 1e-10);
}

TEST_CASE("pure diffusion basis") {
  auto b = build_basis(testing::brownian(4.0));
  REQUIRE(b.dimension() == 1);
  CHECK(b.q(0, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("degenerate measure is rejected and coincident atoms merge") {
  LevyCharacteristics none(1.0, 0.3, 0.0, {}, Modulation::proportional);
  CHECK_THROWS_AS(build_basis(none), InvalidArgument);
  LevyCharacteristics dup(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{1.0, 1.0}},
                          Modulation::proportional);
  auto b = build_basis(dup);
  CHECK(b.dimension() == 1);
  CHECK(!b.warnings().empty());
}

TEST_CASE("gamma follows the modulation") {
  auto r = [](double t) { return 1.0 + t; };
  LevyCharacteristics chars(1.0, 0.0, 0.0,
                            {JumpAtom{1.0, TimeFunction(r)}, JumpAtom{-0.5, TimeFunction([r](double t) { return 3.0 * r(t); })}},
                            Modulation::proportional);
  auto b = build_basis(chars);
  for (double t : {0.0, 0.25, 1.0})
    for (std::size_t k = 0; k < b.dimension(); ++k) CHECK(b.gamma(k, t) == doctest::Approx(std::sqrt(1.0 + t)));
  auto G = instantaneous_gram(b, chars, 0.5);
  CHECK(std::abs(G(0, 1)) < 1e-12);
  CHECK(G(1, 1) == doctest::Approx(1.5));
  CHECK(instantaneous_gram(b, chars, 0.0).isIdentity(1e-12));
  CHECK(b.bracket_integral(0, 0.0, 1.0) == doctest::Approx(1.5));
}

TEST_CASE("general mode off-diagonal Gram is detected") {
  LevyCharacteristics chars(1.0, 0.0, 0.0,
                            {JumpAtom{1.0, 1.0}, JumpAtom{-1.0, TimeFunction([](double t) { return 1.0 + t; })}},
                            Modulation::general);
  auto b = build_basis(chars);
  auto G = instantaneous_gram(b, chars, 1.0);
  CHECK(std::abs(G(0, 1)) > 1e-3);
  std::vector<double> grid{0.0, 0.5, 1.0};
  auto chk = check_diagonal_bracket(b, chars, grid);
  CHECK_FALSE(chk.diagonal);
  CHECK(chk.max_off_diagonal > 1e-3);
  CHECK_THROWS_AS(gamma(b, 0, 1.0), InvalidArgument);
  auto single = build_basis(testing::poisson());
  CHECK(check_diagonal_bracket(single, testing::poisson(), grid).diagonal);
  auto prop = build_basis(testing::two_atom());
  auto pc = check_diagonal_bracket(prop, testing::two_atom(), grid);
  CHECK(pc.diagonal);
  CHECK(pc.max_off_diagonal == doctest::Approx(0.0));
}

TEST_CASE("projection on the basis") {
  auto chars = testing::poisson();
  auto b = build_basis(chars);
  auto zero = project_on_basis(b, chars, [](double, double) { return 0.0; }, 0.5);
  CHECK(zero.norm() == 0.0);
  auto one = project_on_basis(b, chars, [&](double, double e) { return b.p(0, e); }, 0.5);
  CHECK(one(0) == doctest::Approx(1.0));
  auto sym = testing::two_atom();
  auto bs = build_basis(sym);
  auto v = project_on_basis(bs, sym, [](double, double e) { return e * e; }, 0.5);
  CHECK(std::abs(v(0)) < 1e-14);
}

TEST_CASE("basis is invariant under atom order") {
  LevyCharacteristics a(1.0, 0.0, 0.5, {JumpAtom{1.0, 2.0}, JumpAtom{-0.5, 1.0}, JumpAtom{0.25, 3.0}},
                        Modulation::proportional);
  LevyCharacteristics b(1.0, 0.0, 0.5, {JumpAtom{0.25, 3.0}, JumpAtom{1.0, 2.0}, JumpAtom{-0.5, 1.0}},
                        Modulation::proportional);
  auto ba = build_basis(a), bb = build_basis(b);
  REQUIRE(ba.dimension() == 4);
  CHECK((ba.alpha() - bb.alpha()).cwiseAbs().maxCoeff() <= 1e-12);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t m = 0; m < 4; ++m) CHECK(std::abs(pi0_inner(ba, n, m) - (n == m)) <= 1e-10);
}
