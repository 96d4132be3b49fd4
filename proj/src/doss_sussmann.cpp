#include "lbds/doss_sussmann.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "lbds/error.hpp"

namespace lbds {

namespace {

using State = std::array<double, 2>;
namespace ode = boost::numeric::odeint;

constexpr double kOdeTol = 1e-13;
constexpr double kDxStep = 1e-5;

void step_back(const FlowDriver& g, double t0, double t1, double dB, double x, State& s) {
  if (dB == 0.0) return;
  const double h = t1 - t0, rate = dB / h;
  auto sys = [&](const State& u, State& du, double tau) {
    const double t = t1 - tau;
    du[0] = g.value(t, x, u[0]) * rate;
    du[1] = g.dy(t, x, u[0]) * u[1] * rate;
  };
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(kOdeTol, kOdeTol), sys, s,
                          0.0, h, h / 8.0);
  if (!std::isfinite(s[0]) || !std::isfinite(s[1])) throw NumericalError("flow integration diverged");
}

void check_path(const TimeGrid& grid, std::span<const double> dB) {
  if (dB.size() != grid.steps()) throw InvalidArgument("B increments do not match the grid");
}

double hermite(double y0, double y1, const FlowPoint& a, const FlowPoint& b, double y, double* deriv) {
  const double h = y1 - y0, s = (y - y0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  if (deriv) {
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    *deriv = (d00 * a.chi + d01 * b.chi) / h + d10 * a.dchi + d11 * b.dchi;
  }
  return h00 * a.chi + h10 * h * a.dchi + h01 * b.chi + h11 * h * b.dchi;
}

std::size_t locate(std::span<const double> grid, double v) {
  auto it = std::upper_bound(grid.begin(), grid.end(), v);
  std::size_t k = static_cast<std::size_t>(it - grid.begin());
  return std::clamp<std::size_t>(k, 1, grid.size() - 1) - 1;
}

}  // namespace

double FlowDriver::dy(double t, double x, double y) const {
  if (g_y) return g_y(t, x, y);
  const double h = 1e-6 * (1.0 + std::abs(y));
  return (g(t, x, y + h) - g(t, x, y - h)) / (2.0 * h);
}

std::vector<FlowPoint> flow_chi(const FlowDriver& g, const TimeGrid& grid, std::span<const double> dB,
                                double x, double y) {
  check_path(grid, dB);
  const std::size_t N = grid.steps();
  std::vector<FlowPoint> out(N + 1);
  State s{y, 1.0};
  out[N] = {y, 1.0};
  for (std::size_t i = N; i-- > 0;) {
    step_back(g, grid.node(i), grid.node(i + 1), dB[i], x, s);
    out[i] = {s[0], s[1]};
  }
  return out;
}

FlowPoint flow_at(const FlowDriver& g, const TimeGrid& grid, std::span<const double> dB, std::size_t node,
                  double x, double y) {
  check_path(grid, dB);
  if (node > grid.steps()) throw InvalidArgument("flow node out of range");
  State s{y, 1.0};
  for (std::size_t i = grid.steps(); i-- > node;) step_back(g, grid.node(i), grid.node(i + 1), dB[i], x, s);
  return {s[0], s[1]};
}

FlowField::FlowField(FlowDriver g, TimeGrid grid, std::vector<double> dB, std::vector<double> x_grid,
                     std::vector<double> y_grid)
    : g_(std::move(g)), grid_(std::move(grid)), dB_(std::move(dB)), xs_(std::move(x_grid)),
      ys_(std::move(y_grid)) {
  check_path(grid_, dB_);
  if (!g_.g) throw InvalidArgument("flow needs a driver g");
  if (xs_.empty() || ys_.size() < 2) throw InvalidArgument("flow lattice needs >= 1 x and >= 2 y points");
  if (!std::is_sorted(xs_.begin(), xs_.end()) || !std::is_sorted(ys_.begin(), ys_.end()) ||
      std::adjacent_find(ys_.begin(), ys_.end()) != ys_.end() ||
      std::adjacent_find(xs_.begin(), xs_.end()) != xs_.end())
    throw InvalidArgument("flow lattices must be strictly increasing");
  const std::size_t N = grid_.steps(), nx = xs_.size(), ny = ys_.size();
  data_.resize((N + 1) * nx * ny);
  const auto cells = static_cast<long long>(nx * ny);
  bool failed = false;
#pragma omp parallel for schedule(dynamic, 4)
  for (long long c = 0; c < cells; ++c) {
    const std::size_t ix = static_cast<std::size_t>(c) / ny, iy = static_cast<std::size_t>(c) % ny;
    try {
      const auto col = flow_chi(g_, grid_, dB_, xs_[ix], ys_[iy]);
      for (std::size_t i = 0; i <= N; ++i) data_[(i * nx + ix) * ny + iy] = col[i];
    } catch (const NumericalError&) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw NumericalError("flow integration diverged on the lattice");
}

FlowPoint FlowField::column(std::size_t node, double x, std::size_t iy) const {
  const std::size_t nx = xs_.size();
  if (nx == 1 || g_.x_independent) return table(node, 0, iy);
  if (x < xs_.front() - 1e-12 || x > xs_.back() + 1e-12) {
    std::ostringstream msg;
    msg << "x = " << x << " lies outside the flow lattice";
    throw InvalidArgument(msg.str());
  }
  const std::size_t k = locate(xs_, x);
  const std::size_t m = std::min<std::size_t>(4, nx);
  std::size_t lo = k >= 1 ? k - 1 : 0;
  lo = std::min(lo, nx - m);
  FlowPoint out{0.0, 0.0};
  for (std::size_t a = lo; a < lo + m; ++a) {
    double w = 1.0;
    for (std::size_t b = lo; b < lo + m; ++b)
      if (b != a) w *= (x - xs_[b]) / (xs_[a] - xs_[b]);
    const auto v = table(node, a, iy);
    out.chi += w * v.chi;
    out.dchi += w * v.dchi;
  }
  return out;
}

FlowPoint FlowField::chi(std::size_t node, double x, double y) const {
  if (node > grid_.steps()) throw InvalidArgument("flow node out of range");
  if (y < ys_.front() || y > ys_.back()) {
    std::ostringstream msg;
    msg << "y = " << y << " lies outside the flow lattice [" << ys_.front() << ", " << ys_.back() << "]";
    throw NumericalError(msg.str());
  }
  const std::size_t k = locate(ys_, y);
  const auto a = column(node, x, k), b = column(node, x, k + 1);
  FlowPoint out;
  out.chi = hermite(ys_[k], ys_[k + 1], a, b, y, &out.dchi);
  return out;
}

FlowPoint FlowField::exact(std::size_t node, double x, double y) const {
  return flow_at(g_, grid_, dB_, node, x, y);
}

FlowPoint FlowField::at(std::size_t node, double x, double y) const {
  if (y >= ys_.front() && y <= ys_.back()) return chi(node, x, y);
  return exact(node, x, y);
}

double FlowField::dchi_dx(std::size_t node, double x, double y) const {
  if (g_.x_independent) return 0.0;
  return (exact(node, x + kDxStep, y).chi - exact(node, x - kDxStep, y).chi) / (2.0 * kDxStep);
}

double FlowField::pi(std::size_t node, double x, double y) const {
  const std::size_t ny = ys_.size();
  const double first = column(node, x, 0).chi, last = column(node, x, ny - 1).chi;
  if (!(y >= first && y <= last)) {
    std::ostringstream msg;
    msg << "target " << y << " outside the tabulated flow range [" << first << ", " << last << "]";
    throw NumericalError(msg.str());
  }
  std::size_t lo = 0, hi = ny - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (column(node, x, mid).chi <= y ? lo : hi) = mid;
  }
  double a = ys_[lo], b = ys_[hi];
  double fa = exact(node, x, a).chi - y, fb = exact(node, x, b).chi - y;
  // interpolation in x can misplace the bracket by a cell
  for (int widen = 0; fa > 0.0 && widen < 64; ++widen) {
    a -= ys_[hi] - ys_[lo];
    fa = exact(node, x, a).chi - y;
  }
  for (int widen = 0; fb < 0.0 && widen < 64; ++widen) {
    b += ys_[hi] - ys_[lo];
    fb = exact(node, x, b).chi - y;
  }
  if (fa > 0.0 || fb < 0.0) throw NumericalError("flow inversion could not bracket the target");
  double v = fb != fa ? a - fa * (b - a) / (fb - fa) : 0.5 * (a + b);
  for (int it = 0; it < 100; ++it) {
    const auto p = exact(node, x, v);
    const double r = p.chi - y;
    if (std::abs(r) <= 1e-12 * (1.0 + std::abs(y))) return v;
    (r < 0.0 ? a : b) = v;
    double next = v - r / p.dchi;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(v))) return next;
    v = next;
  }
  return v;
}

double FlowField::min_dchi() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : data_) m = std::min(m, p.dchi);
  return m;
}

FlowChecks check_flow(const FlowField& flow, std::size_t node_stride) {
  FlowChecks out;
  out.min_dchi = flow.min_dchi();
  const std::size_t N = flow.grid().steps();
  const auto xs = flow.x_grid(), ys = flow.y_grid();
  std::vector<double> sup_b(N + 1, 0.0);
  double b = 0.0;
  for (std::size_t i = N; i-- > 0;) {
    b += flow.dB()[i];
    sup_b[i] = std::max(sup_b[i + 1], std::abs(b));
  }
  node_stride = std::max<std::size_t>(node_stride, 1);
  for (std::size_t i = 0; i <= N; i += node_stride)
    for (std::size_t ix = 0; ix < xs.size(); ++ix)
      for (std::size_t iy = 0; iy < ys.size(); ++iy) {
        const auto p = flow.table(i, ix, iy);
        out.roundtrip = std::max(out.roundtrip, std::abs(flow.pi(i, xs[ix], p.chi) - ys[iy]));
        if (sup_b[i] > 0.0) {
          out.growth_constant = std::max(out.growth_constant, (std::abs(p.chi) - std::abs(ys[iy])) / sup_b[i]);
          out.derivative_constant = std::max(out.derivative_constant, std::abs(std::log(p.dchi)) / sup_b[i]);
        }
        if (iy % 8 == 0) {
          const double h = 1e-4 * (1.0 + std::abs(ys[iy]));
          const double fd = (flow.exact(i, xs[ix], ys[iy] + h).chi - flow.exact(i, xs[ix], ys[iy] - h).chi) / (2 * h);
          out.fd_mismatch = std::max(out.fd_mismatch, std::abs(fd - p.dchi) / std::abs(p.dchi));
        }
      }
  return out;
}

double flow_generator(const FlowField& flow, const LevyCharacteristics& chars, const ScalarSigma& sigma,
                      std::size_t node, double x, double y) {
  const double t = flow.grid().node(node);
  const double s = sigma(x);
  const double chi = flow.exact(node, x, y).chi;
  const double dx = flow.dchi_dx(node, x, y);
  double v = chars.drift()(t) * s * dx;
  for (const auto& a : chars.atoms())
    v += (flow.exact(node, x + s * a.size, y).chi - chi - dx * s * a.size) * a.intensity(t);
  return v;
}

double transformed_f(const ScalarDriverFn& f, const FlowField& flow, const MartingaleBasis& basis,
                     const LevyCharacteristics& chars, const ScalarSigma& sigma, const TestField& phi,
                     std::size_t node, double x, double y, double z) {
  const double t = flow.grid().node(node);
  const auto c = flow.exact(node, x, y);
  if (!(c.dchi > 0.0)) throw NumericalError("D_y chi is not positive; the flow is corrupted");
  const double dx = flow.dchi_dx(node, x, y);
  const double s = sigma(x);
  const double h = 1e-5 * (1.0 + std::abs(x));
  const double dphi = (phi(t, x + h) - phi(t, x - h)) / (2.0 * h);
  const std::size_t d = basis.dimension();
  std::vector<double> psi(d, 0.0);
  double nonlocal = 0.0;
  for (const auto& a : chars.atoms()) {
    const double xe = x + s * a.size;
    const double shifted = flow.exact(node, xe, phi(t, xe)).chi;
    const double lam = a.intensity(t);
    nonlocal += (shifted - c.chi - (dx + c.dchi * z) * s * a.size) * lam;
    const double diff = shifted - c.chi - (dx + c.dchi * dphi) * a.size;
    for (std::size_t k = 0; k < d; ++k) psi[k] += diff * basis.p(k, a.size) * lam;
  }
  const auto& g = flow.driver();
  const double correction = 0.5 * g.value(t, x, c.chi) * g.dy(t, x, c.chi);
  return (f(t, x, c.chi, psi) - correction + flow_generator(flow, chars, sigma, node, x, y) + nonlocal) / c.dchi;
}

double transformed_h(const ScalarBoundaryFn& h, const FlowField& flow, const SmoothDomain& domain,
                     std::size_t node, double x, double y) {
  const double pt[1] = {x};
  if (domain.dim() != 1) throw InvalidArgument("transformed_h needs a one-dimensional domain");
  if (std::abs(domain.psi(pt)) > 1e-9) {
    std::ostringstream msg;
    msg << "x = " << x << " is not on the boundary";
    throw InvalidArgument(msg.str());
  }
  double grad[1];
  domain.grad_psi(pt, grad);
  const auto c = flow.exact(node, x, y);
  if (!(c.dchi > 0.0)) throw NumericalError("D_y chi is not positive; the flow is corrupted");
  const double t = flow.grid().node(node);
  return (h(t, x, c.chi) + flow.dchi_dx(node, x, y) * grad[0]) / c.dchi;
}

std::vector<FlowField> tabulate_flows(const FlowDriver& g, const PathBatch& batch,
                                      const std::vector<double>& x_grid, const std::vector<double>& y_grid) {
  const std::size_t groups = batch.options().backward_groups;
  const std::size_t count = groups == 0 ? batch.paths() : groups;
  if (batch.paths() < count) throw InvalidArgument("batch has fewer paths than backward groups");
  std::vector<FlowField> flows;
  flows.reserve(count);
  const std::size_t N = batch.steps();
  for (std::size_t gi = 0; gi < count; ++gi) {
    std::size_t p = gi;
    if (groups != 0) p = (gi + groups - batch.options().first_path % groups) % groups;
    std::vector<double> dB(N);
    for (std::size_t i = 0; i < N; ++i) dB[i] = batch.dB(p, i);
    flows.emplace_back(g, batch.grid(), std::move(dB), x_grid, y_grid);
  }
  return flows;
}

namespace {

const FlowField& flow_for(const std::vector<FlowField>& flows, const PathBatch& batch, std::size_t path) {
  const std::size_t k = batch.options().backward_groups == 0 ? path : batch.backward_group(path);
  return flows.at(k);
}

}  // namespace

DriverSet transformed_drivers(const DriverSet& original, const FlowDriver& g,
                              const std::vector<FlowField>& flows, const PathBatch& batch,
                              const MartingaleBasis& basis) {
  if (!g.x_independent) throw InvalidArgument("the pathwise transformation needs an x-independent g");
  if (original.f_uses_z) throw InvalidArgument("the pathwise transformation needs f independent of z");
  const auto& chars = basis.characteristics();
  for (double t : batch.grid().nodes())
    if (chars.diffusion()(t) != 0.0) throw InvalidArgument("the pathwise transformation needs c = 0");
  const std::size_t d = basis.dimension();
  std::vector<double> p_at;
  for (const auto& a : chars.atoms())
    for (std::size_t k = 0; k < d; ++k) p_at.push_back(basis.p(k, a.size));

  DriverSet out = original;
  const auto* fl = &flows;
  const auto* bt = &batch;
  const auto f = original.f;
  out.f = [=, &chars](const DriverContext& ctx, double v, std::span<const double> z) {
    const auto& flow = flow_for(*fl, *bt, ctx.path);
    const auto c = flow.at(ctx.node, 0.0, v);
    const std::vector<double> zero(d, 0.0);
    double val = f ? f(ctx, c.chi, zero) : 0.0;
    val -= 0.5 * g.value(ctx.t, 0.0, c.chi) * g.dy(ctx.t, 0.0, c.chi);
    const auto atoms = chars.atoms();
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      double jump = 0.0;
      for (std::size_t k = 0; k < d && k < z.size(); ++k) jump += z[k] * p_at[j * d + k];
      if (jump == 0.0) continue;
      const double shifted = flow.at(ctx.node, 0.0, v + jump).chi;
      val += (shifted - c.chi - c.dchi * jump) * atoms[j].intensity(ctx.t);
    }
    return val / c.dchi;
  };
  out.f_uses_z = chars.atoms().size() > 0;
  const auto h = original.h;
  out.h = [=](const DriverContext& ctx, double v) {
    if (!h) return 0.0;
    const auto c = flow_for(*fl, *bt, ctx.path).at(ctx.node, 0.0, v);
    return h(ctx, c.chi) / c.dchi;
  };
  out.g = [](const DriverContext&, double, std::span<const double>) { return 0.0; };
  out.g_uses_yz = false;
  // coefficients still depend on the B path, so regress per group
  out.g_vanishes = false;
  return out;
}

SolutionGrid flow_restore(const SolutionGrid& v, const std::vector<FlowField>& flows, const PathBatch& batch) {
  const std::size_t n = v.paths(), N = v.steps(), d = v.dim();
  SolutionGrid out(n, N, d);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& flow = flow_for(flows, batch, p);
    for (std::size_t i = 0; i <= N; ++i) {
      const auto c = flow.at(i, 0.0, v.Y(p, i));
      out.Y(p, i) = c.chi;
      out.K(p, i) = v.K(p, i);
      if (i < N)
        for (std::size_t k = 0; k < d; ++k) out.Z(p, i)[k] = c.dchi * v.Z(p, i)[k];
    }
  }
  out.diagnostics = v.diagnostics;
  return out;
}

}  // namespace lbds
