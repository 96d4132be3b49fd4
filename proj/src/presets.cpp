#include "lbds/presets.hpp"

#include <algorithm>
#include <cmath>

#include "lbds/error.hpp"

namespace lbds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double horner(const std::vector<double>& c, double y) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * y + c[k];
  return v;
}

double horner_dy(const std::vector<double>& c, double y) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) v = v * y + static_cast<double>(k) * c[k];
  return v;
}

double coef(const std::vector<double>& c, std::size_t k) { return k < c.size() ? c[k] : 0.0; }

double dot(const std::vector<double>& w, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size() && k < z.size(); ++k) s += w[k] * z[k];
  return s;
}

double norm2(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

double first(const DriverContext& ctx) { return ctx.x.empty() ? 0.0 : ctx.x[0]; }

DriverSpec checked(DriverSpec s) {
  for (double v : s.y)
    if (!std::isfinite(v)) throw InvalidArgument("driver coefficients must be finite");
  for (double v : s.z)
    if (!std::isfinite(v)) throw InvalidArgument("driver z coefficients must be finite");
  if (!std::isfinite(s.x)) throw InvalidArgument("driver x coefficient must be finite");
  if (!(s.cap > 0.0)) throw InvalidArgument("driver cap must be positive");
  return s;
}

}  // namespace

DriverSpec DriverSpec::linear(double a, double c, std::vector<double> z, double x) {
  return checked({Kind::linear, {c, a}, std::move(z), x, kInf});
}

DriverSpec DriverSpec::cubic_monotone(double a, double b, double c) {
  if (!(a >= 0.0 && b >= 0.0)) throw InvalidArgument("cubic_monotone needs nonnegative coefficients");
  return checked({Kind::cubic_monotone, {c, -b, 0.0, -a}, {}, 0.0, kInf});
}

DriverSpec DriverSpec::capped(double a, double c, double cap, std::vector<double> z, double x) {
  return checked({Kind::capped, {c, a}, std::move(z), x, cap});
}

DriverSpec DriverSpec::polynomial(std::vector<double> coeffs, std::vector<double> z, double x) {
  return checked({Kind::polynomial, std::move(coeffs), std::move(z), x, kInf});
}

double DriverSpec::operator()(double x0, double y, std::span<const double> zv) const {
  if (kind == Kind::zero) return 0.0;
  const double v = horner(this->y, y) + dot(z, zv) + x * x0;
  return std::clamp(v, -cap, cap);
}

double DriverSpec::dy(double x0, double y, std::span<const double> zv) const {
  if (kind == Kind::zero) return 0.0;
  if (std::isfinite(cap) && std::abs(horner(this->y, y) + dot(z, zv) + x * x0) > cap) return 0.0;
  return horner_dy(this->y, y);
}

int DriverSpec::degree() const {
  if (kind == Kind::zero) return -1;
  for (std::size_t k = y.size(); k-- > 0;)
    if (y[k] != 0.0) return static_cast<int>(k);
  return -1;
}

bool DriverSpec::vanishes() const {
  return kind == Kind::zero ||
         (degree() < 0 && x == 0.0 && std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
}

bool DriverSpec::uses_y() const { return degree() >= 1; }

bool DriverSpec::uses_z() const {
  return kind != Kind::zero && std::any_of(z.begin(), z.end(), [](double v) { return v != 0.0; });
}

double DriverSpec::sup_slope() const {
  const int d = degree();
  if (d <= 0) return 0.0;
  if (d == 1) return kind == Kind::capped ? std::max(y[1], 0.0) : y[1];
  if (d == 3 && coef(y, 2) == 0.0 && y[3] < 0.0) return y[1];
  return kInf;
}

double DriverSpec::lipschitz() const {
  const int d = degree();
  if (d <= 0) return 0.0;
  if (d == 1) return std::abs(y[1]);
  return kInf;
}

bool DriverSpec::nonincreasing() const { return sup_slope() <= 0.0; }

std::string to_string(DriverSpec::Kind kind) {
  switch (kind) {
    case DriverSpec::Kind::zero: return "zero";
    case DriverSpec::Kind::linear: return "linear";
    case DriverSpec::Kind::cubic_monotone: return "cubic_monotone";
    case DriverSpec::Kind::capped: return "capped";
    case DriverSpec::Kind::polynomial: return "polynomial";
  }
  return "zero";
}

DriverSpec::Kind driver_kind(const std::string& name) {
  for (auto k : {DriverSpec::Kind::zero, DriverSpec::Kind::linear, DriverSpec::Kind::cubic_monotone,
                 DriverSpec::Kind::capped, DriverSpec::Kind::polynomial})
    if (to_string(k) == name) return k;
  throw InvalidArgument("unknown driver preset '" + name + "'");
}

double FieldSpec::operator()(double t, double x0) const {
  double v = 0.0;
  for (const auto& term : terms) v += term.coef * std::pow(t, term.t_power) * std::pow(x0, term.x_power);
  return v;
}

DriverSet make_drivers(const ProblemSpec& spec, double x_bound, double gamma_min) {
  if (!(gamma_min > 0.0)) throw InvalidArgument("gamma floor must be positive");
  DriverSet d = zero_drivers();
  auto& b = d.bounds;

  const DriverSpec f = spec.f;
  d.f = [f](const DriverContext& ctx, double y, std::span<const double> z) { return f(first(ctx), y, z); };
  d.f_uses_z = f.uses_z();
  d.monotone = f.nonincreasing();
  b.lambda = f.sup_slope();
  b.lipschitz_y = f.lipschitz();
  b.eta = norm2(f.z) / gamma_min;
  b.varphi = std::min(std::abs(coef(f.y, 0)) + std::abs(f.x) * x_bound, f.cap);
  b.phi = f.lipschitz();

  const DriverSpec h = spec.h;
  d.h = [h](const DriverContext& ctx, double y) { return h(first(ctx), y, {}); };
  b.varrho = h.sup_slope();
  b.psi = std::min(std::abs(coef(h.y, 0)) + std::abs(h.x) * x_bound, h.cap);
  b.zeta = h.lipschitz();

  const DriverSpec g = spec.g;
  d.g = [g](const DriverContext& ctx, double y, std::span<const double> z) { return g(first(ctx), y, z); };
  d.g_vanishes = g.vanishes();
  d.g_uses_yz = g.uses_y() || g.uses_z();
  b.rho = g.lipschitz() * g.lipschitz();
  b.alpha = std::pow(norm2(g.z) / gamma_min, 2);
  return d;
}

RGBDSDEProblem make_problem(const ProblemSpec& spec, double x_bound, double gamma_min) {
  RGBDSDEProblem pr;
  pr.drivers = make_drivers(spec, x_bound, gamma_min);
  pr.terminal = [xi = spec.terminal](const DriverContext& ctx) { return xi(ctx.t, first(ctx)); };
  if (spec.obstacle)
    pr.obstacle = [s = *spec.obstacle](const DriverContext& ctx) { return s(ctx.t, first(ctx)); };
  return pr;
}

SIPDEProblem make_sipde(LevyCharacteristics chars, SmoothDomain domain, AffineSigma sigma,
                        const ProblemSpec& spec) {
  const double xb = domain.kind() == DomainKind::interval
                        ? std::max(std::abs(domain.lower()), std::abs(domain.upper()))
                        : 1.0;
  SIPDEProblem p{std::move(chars), std::move(domain), {}, {}, {}, {}};
  p.sigma = sigma;
  p.drivers = make_drivers(spec, xb);
  p.terminal = [xi = spec.terminal, T = p.chars.horizon()](double x) { return xi(T, x); };
  if (spec.obstacle) p.obstacle = [s = *spec.obstacle](double t, double x) { return s(t, x); };
  return p;
}

double weight_rate(const DriverBounds& b, double epsilon) {
  double a2 = 0.0;
  for (double part : {std::abs(b.lambda), b.phi, b.phi * b.phi, b.rho, b.eta * b.eta})
    if (std::isfinite(part)) a2 += part;
  return std::max(a2, epsilon);
}

double gamma_floor(const MartingaleBasis& basis, std::span<const double> nodes) {
  double g = 1.0;
  bool any = false;
  for (std::size_t k = 0; k < basis.dimension(); ++k)
    for (double t : nodes) {
      const double v = basis.gamma(k, t);
      g = any ? std::min(g, v) : v;
      any = true;
    }
  return any && g > 0.0 ? g : 1.0;
}

namespace models {

LevyCharacteristics poisson(double lambda, double T) {
  return LevyCharacteristics(T, 0.0, 0.0, {JumpAtom{1.0, lambda}}, Modulation::proportional);
}

LevyCharacteristics two_atom(double T) {
  return LevyCharacteristics(T, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{-1.0, 1.0}}, Modulation::proportional);
}

LevyCharacteristics mixed(double T) {
  return LevyCharacteristics(T, 0.3, 0.5, {JumpAtom{1.0, 2.0}, JumpAtom{-0.5, 1.0}}, Modulation::proportional);
}

namespace {
FieldSpec quadratic_terminal() { return {{{0.5, 0, 0}, {0.25, 0, 2}}}; }
FieldSpec decreasing_obstacle() { return {{{0.45, 0, 0}, {-0.45, 1, 0}}}; }
}  // namespace

ProblemSpec z_coupled() {
  ProblemSpec s;
  s.f = DriverSpec::linear(-1.0, 0.0, {0.5});
  s.g = DriverSpec::linear(0.3);
  s.terminal = quadratic_terminal();
  s.obstacle = decreasing_obstacle();
  return s;
}

DriverSpec cubic_f() { return DriverSpec::cubic_monotone(1.0, 1.0); }
DriverSpec cubic_h() { return DriverSpec::cubic_monotone(0.5, 0.2); }

ProblemSpec cubic() {
  ProblemSpec s;
  s.f = cubic_f();
  s.h = cubic_h();
  s.g = DriverSpec::polynomial({0.2});
  s.terminal = quadratic_terminal();
  s.obstacle = decreasing_obstacle();
  return s;
}

ProblemSpec sipde_spec(bool with_obstacle) {
  ProblemSpec s;
  s.f = DriverSpec::linear(-0.5, 0.0, {}, 1.0);
  s.h = DriverSpec::linear(-0.5, 0.3);
  s.terminal = {{{1.0, 0, 2}}};
  if (with_obstacle) s.obstacle = FieldSpec{{{0.5, 0, 0}, {-0.5, 1, 0}, {-0.5, 0, 1}, {0.5, 1, 1}}};
  return s;
}

SIPDEProblem sipde(bool with_obstacle) {
  return make_sipde(poisson(1.0), SmoothDomain::interval(0.0, 1.0), AffineSigma{0.5, -0.5},
                    sipde_spec(with_obstacle));
}

}  // namespace models

}  // namespace lbds
