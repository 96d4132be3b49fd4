#include "lbds/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "lbds/error.hpp"

namespace lbds {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidArgument("config " + where + ": " + what);
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail(where, "unknown key '" + it.key() + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "must be finite");
  return v;
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

std::size_t count(const json& j, const std::string& where, std::size_t min_value) {
  if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min_value))
    fail(where, "expected an integer >= " + std::to_string(min_value));
  return j.get<std::size_t>();
}

std::size_t count_or(const json& j, const char* key, std::size_t fallback, std::size_t min_value,
                     const std::string& where) {
  return j.contains(key) ? count(j.at(key), where + "." + key, min_value) : fallback;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

TimeFunction time_function(const json& j, const std::string& where) {
  if (j.is_number()) return TimeFunction(number(j, where));
  if (!j.is_array()) fail(where, "expected a number or a list of {coef, power, rate} terms");
  TimeExpr e;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string w = where + "[" + std::to_string(k) + "]";
    allow_keys(j[k], w, {"coef", "power", "rate"});
    TimeTerm t;
    t.coef = number_or(j[k], "coef", 0.0, w);
    t.power = static_cast<int>(count_or(j[k], "power", 0, 0, w));
    t.rate = number_or(j[k], "rate", 0.0, w);
    e.terms.push_back(t);
  }
  return TimeFunction(e);
}

LevyCharacteristics characteristics(const json& j) {
  const std::string w = "characteristics";
  allow_keys(j, w, {"T", "b", "c", "atoms", "modulation"});
  if (!j.contains("T")) fail(w, "missing horizon T");
  const double T = number(j.at("T"), w + ".T");
  const TimeFunction b = j.contains("b") ? time_function(j.at("b"), w + ".b") : TimeFunction(0.0);
  const TimeFunction c = j.contains("c") ? time_function(j.at("c"), w + ".c") : TimeFunction(0.0);
  std::vector<JumpAtom> atoms;
  if (j.contains("atoms")) {
    const auto& a = j.at("atoms");
    if (!a.is_array()) fail(w + ".atoms", "expected an array");
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::string wa = w + ".atoms[" + std::to_string(k) + "]";
      allow_keys(a[k], wa, {"e", "lambda"});
      if (!a[k].contains("e") || !a[k].contains("lambda")) fail(wa, "needs e and lambda");
      atoms.push_back(JumpAtom{number(a[k].at("e"), wa + ".e"), time_function(a[k].at("lambda"), wa + ".lambda")});
    }
  }
  Modulation mode = Modulation::proportional;
  if (j.contains("modulation")) {
    const auto m = text(j.at("modulation"), w + ".modulation");
    if (m == "general") mode = Modulation::general;
    else if (m != "proportional") fail(w + ".modulation", "expected proportional or general");
  }
  return LevyCharacteristics(T, b, c, std::move(atoms), mode);
}

DriverSpec driver(const json& j, const std::string& w) {
  if (!j.is_object() || !j.contains("preset")) fail(w, "expected an object with a preset");
  const auto kind = driver_kind(text(j.at("preset"), w + ".preset"));
  auto zs = [&] { return j.contains("z") ? numbers(j.at("z"), w + ".z") : std::vector<double>{}; };
  switch (kind) {
    case DriverSpec::Kind::zero:
      allow_keys(j, w, {"preset"});
      return DriverSpec::zero();
    case DriverSpec::Kind::linear:
      allow_keys(j, w, {"preset", "a", "c", "z", "x"});
      return DriverSpec::linear(number_or(j, "a", 0.0, w), number_or(j, "c", 0.0, w), zs(), number_or(j, "x", 0.0, w));
    case DriverSpec::Kind::cubic_monotone:
      allow_keys(j, w, {"preset", "a", "b", "c"});
      return DriverSpec::cubic_monotone(number_or(j, "a", 1.0, w), number_or(j, "b", 0.0, w),
                                        number_or(j, "c", 0.0, w));
    case DriverSpec::Kind::capped:
      allow_keys(j, w, {"preset", "a", "c", "cap", "z", "x"});
      if (!j.contains("cap")) fail(w, "capped preset needs cap");
      return DriverSpec::capped(number_or(j, "a", 0.0, w), number_or(j, "c", 0.0, w), number(j.at("cap"), w + ".cap"),
                                zs(), number_or(j, "x", 0.0, w));
    case DriverSpec::Kind::polynomial:
      allow_keys(j, w, {"preset", "coeffs", "z", "x"});
      if (!j.contains("coeffs")) fail(w, "polynomial preset needs coeffs");
      return DriverSpec::polynomial(numbers(j.at("coeffs"), w + ".coeffs"), zs(), number_or(j, "x", 0.0, w));
  }
  fail(w, "unreachable preset");
}

FieldSpec field(const json& j, const std::string& w) {
  if (j.is_number()) return FieldSpec::constant(number(j, w));
  allow_keys(j, w, {"terms"});
  if (!j.contains("terms") || !j.at("terms").is_array()) fail(w, "expected {terms: [[coef, t_power, x_power], ...]}");
  FieldSpec f;
  const auto& terms = j.at("terms");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const std::string wt = w + ".terms[" + std::to_string(k) + "]";
    if (!terms[k].is_array() || terms[k].size() != 3) fail(wt, "expected [coef, t_power, x_power]");
    f.terms.push_back({number(terms[k][0], wt), static_cast<int>(count(terms[k][1], wt, 0)),
                       static_cast<int>(count(terms[k][2], wt, 0))});
  }
  return f;
}

DomainSpec domain(const json& j) {
  const std::string w = "domain";
  allow_keys(j, w, {"kind", "a", "b", "center", "radius", "sphere_constant"});
  DomainSpec d;
  const auto kind = j.contains("kind") ? text(j.at("kind"), w + ".kind") : std::string("interval");
  if (kind == "interval") {
    d.kind = DomainKind::interval;
    d.a = number_or(j, "a", 0.0, w);
    d.b = number_or(j, "b", 1.0, w);
  } else if (kind == "ball") {
    d.kind = DomainKind::ball;
    if (!j.contains("center")) fail(w, "ball needs a center");
    d.center = numbers(j.at("center"), w + ".center");
    d.radius = number_or(j, "radius", 1.0, w);
  } else {
    fail(w + ".kind", "expected interval or ball");
  }
  d.sphere_constant = number_or(j, "sphere_constant", 2.0, w);
  make_domain(d);
  return d;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

SolverConfig ExperimentConfig::solver() const {
  SolverConfig s;
  s.regression.degree = numerics.degree;
  s.picard_tol = numerics.picard_tol;
  s.picard_max_iters = numerics.picard_max_iters;
  s.theta = numerics.theta;
  s.mu = numerics.mu;
  s.epsilon = numerics.epsilon;
  return s;
}

ExperimentConfig parse_config(const std::string& source) {
  json j;
  try {
    j = json::parse(source);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "root", {"seed", "characteristics", "grid", "batch", "problem", "domain", "numerics", "pde", "outputs"});
  ExperimentConfig cfg;
  cfg.canonical = j.dump();
  cfg.hash = fnv1a64(cfg.canonical);
  if (!j.contains("seed")) fail("root", "seed is mandatory");
  if (!j.at("seed").is_number_unsigned()) fail("seed", "expected a non-negative integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (!j.contains("characteristics")) fail("root", "missing characteristics block");
  cfg.chars.emplace(characteristics(j.at("characteristics")));

  const json none = json::object();
  const auto& g = j.value("grid", none);
  allow_keys(g, "grid", {"t0", "T", "N"});
  cfg.t0 = number_or(g, "t0", 0.0, "grid");
  cfg.T = number_or(g, "T", cfg.chars->horizon(), "grid");
  cfg.steps = count_or(g, "N", 100, 1, "grid");
  if (!(cfg.t0 >= 0.0 && cfg.t0 < cfg.T && cfg.T <= cfg.chars->horizon()))
    fail("grid", "need 0 <= t0 < T <= characteristics.T");

  const auto& b = j.value("batch", none);
  allow_keys(b, "batch", {"paths", "backward_groups"});
  cfg.paths = count_or(b, "paths", 1000, 1, "batch");
  cfg.backward_groups = count_or(b, "backward_groups", 0, 0, "batch");

  const auto& p = j.value("problem", none);
  allow_keys(p, "problem", {"f", "g", "h", "terminal", "obstacle", "state", "x0", "sigma"});
  if (p.contains("f")) cfg.problem.f = driver(p.at("f"), "problem.f");
  if (p.contains("g")) cfg.problem.g = driver(p.at("g"), "problem.g");
  if (p.contains("h")) cfg.problem.h = driver(p.at("h"), "problem.h");
  cfg.problem.terminal = p.contains("terminal") ? field(p.at("terminal"), "problem.terminal") : FieldSpec{};
  if (p.contains("obstacle") && !p.at("obstacle").is_null()) cfg.problem.obstacle = field(p.at("obstacle"), "problem.obstacle");
  if (p.contains("state")) {
    const auto s = text(p.at("state"), "problem.state");
    if (s == "none") cfg.state = StateKind::none;
    else if (s == "levy") cfg.state = StateKind::levy;
    else if (s == "reflected") cfg.state = StateKind::reflected;
    else fail("problem.state", "expected none, levy or reflected");
  }
  if (p.contains("x0")) cfg.x0 = numbers(p.at("x0"), "problem.x0");
  if (p.contains("sigma")) {
    allow_keys(p.at("sigma"), "problem.sigma", {"c", "slope"});
    cfg.sigma.c = number_or(p.at("sigma"), "c", 1.0, "problem.sigma");
    cfg.sigma.slope = number_or(p.at("sigma"), "slope", 0.0, "problem.sigma");
  }

  cfg.domain = domain(j.value("domain", none));
  const std::size_t dim = cfg.domain.kind == DomainKind::ball ? cfg.domain.center.size() : 1;
  if (cfg.x0.size() != dim) fail("problem.x0", "dimension does not match the domain");
  if (dim > 1 && cfg.sigma.slope != 0.0) fail("problem.sigma", "state-dependent sigma needs a 1D domain");

  const auto& n = j.value("numerics", none);
  allow_keys(n, "numerics", {"theta", "mu", "epsilon", "deltas", "picard_tol", "picard_max_iters", "degree", "method"});
  auto& nc = cfg.numerics;
  nc.theta = number_or(n, "theta", nc.theta, "numerics");
  nc.mu = number_or(n, "mu", nc.mu, "numerics");
  nc.epsilon = number_or(n, "epsilon", nc.epsilon, "numerics");
  if (n.contains("deltas")) nc.deltas = numbers(n.at("deltas"), "numerics.deltas");
  nc.picard_tol = number_or(n, "picard_tol", nc.picard_tol, "numerics");
  nc.picard_max_iters = count_or(n, "picard_max_iters", nc.picard_max_iters, 1, "numerics");
  nc.degree = static_cast<int>(count_or(n, "degree", 2, 0, "numerics"));
  if (n.contains("method")) {
    const auto m = text(n.at("method"), "numerics.method");
    if (m == "picard") nc.method = SolveMethod::picard;
    else if (m == "yosida") nc.method = SolveMethod::yosida;
    else fail("numerics.method", "expected picard or yosida");
  }
  if (!(nc.theta > 0.0 && nc.mu > 0.0 && nc.epsilon > 0.0 && nc.picard_tol > 0.0))
    fail("numerics", "theta, mu, epsilon and picard_tol must be positive");
  if (nc.deltas.empty()) fail("numerics.deltas", "needs at least one value");
  for (double d : nc.deltas)
    if (!(d > 0.0)) fail("numerics.deltas", "values must be positive");

  const auto& q = j.value("pde", none);
  allow_keys(q, "pde", {"t", "x", "paths", "steps", "fd_cells", "fd_steps", "scheme_tol"});
  auto& pc = cfg.pde;
  if (q.contains("t")) pc.t = numbers(q.at("t"), "pde.t");
  if (q.contains("x")) pc.x = numbers(q.at("x"), "pde.x");
  pc.paths = count_or(q, "paths", pc.paths, 2, "pde");
  pc.steps = count_or(q, "steps", pc.steps, 1, "pde");
  pc.fd_cells = count_or(q, "fd_cells", pc.fd_cells, 4, "pde");
  pc.fd_steps = count_or(q, "fd_steps", pc.fd_steps, 1, "pde");
  pc.scheme_tol = number_or(q, "scheme_tol", pc.scheme_tol, "pde");
  if (pc.t.empty() || pc.x.empty()) fail("pde", "t and x grids must be non-empty");

  const auto& o = j.value("outputs", none);
  allow_keys(o, "outputs", {"directory", "formats", "max_csv_paths"});
  if (o.contains("directory")) cfg.outputs.directory = text(o.at("directory"), "outputs.directory");
  if (o.contains("formats")) {
    const auto& f = o.at("formats");
    if (!f.is_array()) fail("outputs.formats", "expected an array");
    cfg.outputs.csv = cfg.outputs.json = false;
    for (const auto& e : f) {
      const auto s = text(e, "outputs.formats");
      if (s == "csv") cfg.outputs.csv = true;
      else if (s == "json") cfg.outputs.json = true;
      else fail("outputs.formats", "expected csv or json entries");
    }
  }
  cfg.outputs.max_csv_paths = count_or(o, "max_csv_paths", cfg.outputs.max_csv_paths, 0, "outputs");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace lbds
