#include "doctest.h"

#include <string>

#include "lbds/config.hpp"
#include "lbds/error.hpp"

using namespace lbds;

namespace {

const std::string kMinimal = R"({"seed": 3, "characteristics": {"T": 1.0, "atoms": [{"e": 1.0, "lambda": 2.0}]}})";

std::string with(const std::string& extra) {
  return R"({"seed": 3, "characteristics": {"T": 1.0, "atoms": [{"e": 1.0, "lambda": 2.0}]}, )" + extra + "}";
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.seed == 3);
  CHECK(c.steps == 100);
  CHECK(c.paths == 1000);
  CHECK(c.state == StateKind::levy);
  CHECK(c.numerics.theta == 8.0);
  CHECK(c.numerics.deltas.size() == 4);
  CHECK(c.characteristics().atoms().size() == 1);
  CHECK(c.grid().steps() == 100);
}

TEST_CASE("hash is independent of key order and whitespace") {
  const auto a = parse_config(R"({"seed": 3, "grid": {"N": 10, "T": 1.0}, "characteristics": {"T": 1.0}})");
  const auto b = parse_config(R"({ "characteristics":{"T":1.0},"grid":{"T":1.0,"N":10},"seed":3 })");
  CHECK(a.hash == b.hash);
  CHECK(a.canonical == b.canonical);
  const auto c = parse_config(R"({"seed": 4, "grid": {"N": 10, "T": 1.0}, "characteristics": {"T": 1.0}})");
  CHECK(a.hash != c.hash);
  CHECK(hex64(0x1234).size() == 16);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("problem block parses drivers and fields") {
  const auto c = parse_config(with(R"("problem": {
      "f": {"preset": "cubic_monotone", "a": 1.0, "b": 0.5},
      "g": {"preset": "linear", "a": 0.3, "z": [0.1]},
      "terminal": 0.7,
      "obstacle": {"terms": [[0.5, 1, 0]]},
      "state": "none"})"));
  CHECK(c.problem.f.kind == DriverSpec::Kind::cubic_monotone);
  CHECK(c.problem.g.uses_z());
  CHECK(c.problem.terminal(0.0, 5.0) == doctest::Approx(0.7));
  REQUIRE(c.problem.obstacle);
  CHECK((*c.problem.obstacle)(0.5, 0.0) == doctest::Approx(0.25));
  CHECK(c.state == StateKind::none);
}

TEST_CASE("config errors are reported as invalid arguments") {
  CHECK_THROWS_AS(parse_config("not json"), InvalidArgument);
  CHECK_THROWS_AS(parse_config(R"({"characteristics": {"T": 1.0}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_config(R"({"seed": -1, "characteristics": {"T": 1.0}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1.5, "characteristics": {"T": 1.0}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("unknown": 1)")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("grid": {"N": 0})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("grid": {"T": 2.0})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("problem": {"f": {"preset": "quartic"}})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("problem": {"f": {"preset": "linear", "slope": 1}})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("problem": {"state": "bouncing"}})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("numerics": {"theta": -1})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("numerics": {"method": "newton"}})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("outputs": {"formats": ["xml"]})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(with(R"("domain": {"kind": "annulus"})")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "characteristics": {"T": 1.0, "atoms": [{"e": 0.0, "lambda": 1.0}]}})"),
                  InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidArgument);
}

TEST_CASE("ball domain needs matching x0") {
  CHECK_THROWS_AS(parse_config(with(R"("domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0})")),
                  InvalidArgument);
  const auto c = parse_config(with(R"("domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                                     "problem": {"x0": [0.1, 0.2]})"));
  CHECK(c.domain.kind == DomainKind::ball);
  CHECK(c.x0.size() == 2);
}
