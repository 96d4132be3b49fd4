#include "doctest.h"

#include <cmath>

#include "lbds/error.hpp"
#include "lbds/levy_model.hpp"
#include "test_models.hpp"

using namespace lbds;

TEST_CASE("constant single atom is valid and proportional with r = 1") {
  auto chars = testing::poisson();
  auto rep = validate_characteristics(chars);
  CHECK(rep.proportional_detected);
  CHECK(chars.modulation(0.3) == doctest::Approx(1.0));
  CHECK(chars.modulation(0.9) == doctest::Approx(1.0));
  CHECK(std::isfinite(rep.nl1_integral));
  CHECK(rep.nl1_integral == doctest::Approx(2.0));
}

TEST_CASE("invalid characteristics are rejected") {
  CHECK_THROWS_AS(LevyCharacteristics(1.0, 0.0, 0.0, {JumpAtom{0.0, 1.0}}, Modulation::general),
                  InvalidArgument);
  CHECK_THROWS_AS(LevyCharacteristics(1.0, 0.0, 0.0, {JumpAtom{1.0, -1.0}}, Modulation::general),
                  InvalidArgument);
  std::vector<JumpAtom> atoms{{1.0, TimeFunction([](double t) { return 1.0 + t; })}, {-0.5, 2.0}};
  CHECK_THROWS_AS(LevyCharacteristics(1.0, 0.0, 0.0, atoms, Modulation::proportional),
                  InvalidArgument);
  CHECK_NOTHROW(LevyCharacteristics(1.0, 0.0, 0.0, atoms, Modulation::general));
  CHECK_THROWS_AS(LevyCharacteristics(0.0, 0.0, 0.0, {}, Modulation::general), InvalidArgument);
}

TEST_CASE("time-varying proportional modulation") {
  auto r = [](double t) { return 1.0 + t; };
  LevyCharacteristics chars(1.0, 0.0, TimeFunction([r](double t) { return 0.5 * r(t); }),
                            {JumpAtom{1.0, TimeFunction([r](double t) { return 2.0 * r(t); })}},
                            Modulation::proportional);
  CHECK(chars.report().proportional_detected);
  CHECK(chars.modulation(0.5) == doctest::Approx(1.5));
  CHECK(chars.modulation_integral(0.0, 1.0) == doctest::Approx(1.5));
}

TEST_CASE("mean drift adds only big jumps") {
  LevyCharacteristics small(1.0, 0.3, 0.0, {JumpAtom{0.5, 1.0}, JumpAtom{-1.0, 2.0}},
                            Modulation::proportional);
  CHECK(mean_drift(small, 0.5) == doctest::Approx(0.3));
  LevyCharacteristics big(1.0, 0.0, 0.0, {JumpAtom{2.0, 1.0}}, Modulation::proportional);
  CHECK(mean_drift(big, 0.5) == doctest::Approx(2.0));
  LevyCharacteristics pair(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{-0.5, 2.0}},
                           Modulation::general);
  CHECK(mean_drift(pair, 0.2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(mean_drift(pair, 1.5), InvalidArgument);
}

TEST_CASE("power moments") {
  auto chars = testing::poisson();
  CHECK(power_moment(chars, 2, 1.0) == doctest::Approx(2.0));
  CHECK(power_moment(testing::two_atom(), 3, 0.7) == doctest::Approx(0.0));
  for (int i = 1; i <= 4; ++i) CHECK(power_moment(chars, i, 0.0) == 0.0);
  LevyCharacteristics tv(1.0, 0.0, 0.0,
                         {JumpAtom{-2.0, TimeFunction([](double t) { return 1.0 + t * t; })},
                          JumpAtom{0.5, 3.0}},
                         Modulation::general);
  MomentTable table(tv, 4);
  for (int i : {2, 4}) {
    double prev = -1.0;
    for (int k = 0; k <= 50; ++k) {
      const double v = table(i, k / 50.0);
      CHECK(v >= prev);
      prev = v;
    }
  }
  CHECK(table(2, 1.0) == doctest::Approx(4.0 * (1.0 + 1.0 / 3.0) + 0.25 * 3.0));
}

TEST_CASE("proportional detection is order independent and idempotent") {
  auto r = [](double t) { return std::exp(-t); };
  std::vector<JumpAtom> atoms{{1.0, TimeFunction([r](double t) { return 2.0 * r(t); })},
                              {-0.5, TimeFunction([r](double t) { return 0.5 * r(t); })},
                              {0.25, TimeFunction([r](double t) { return 4.0 * r(t); })}};
  TimeFunction c([r](double t) { return 0.1 * r(t); });
  const bool base = detect_proportional(1.0, c, atoms);
  CHECK(base);
  std::vector<JumpAtom> rev(atoms.rbegin(), atoms.rend());
  CHECK(detect_proportional(1.0, c, rev) == base);
  CHECK(detect_proportional(1.0, c, atoms) == base);
}
