#include "lbds/bdsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lbds/error.hpp"
#include "lbds/rng.hpp"
#include "lbds/root.hpp"

namespace lbds {

namespace {

template <class Fn>
void for_each_path(std::size_t n, Fn&& fn) {
  std::string failure;
  bool numerical = true;
  const auto np = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    try {
      fn(static_cast<std::size_t>(p));
    } catch (const InvalidArgument& e) {
#pragma omp critical(lbds_solver_failure)
      if (failure.empty()) {
        failure = e.what();
        numerical = false;
      }
    } catch (const std::exception& e) {
#pragma omp critical(lbds_solver_failure)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) {
    if (numerical) throw NumericalError(failure);
    throw InvalidArgument(failure);
  }
}

DriverContext context(const ForwardState& fwd, const TimeGrid& grid, std::size_t p, std::size_t node) {
  return DriverContext{grid.node(node), node, p, fwd.X(p, node), fwd.kappa(p, node)};
}

void check_layout(const ForwardState& fwd, const PathBatch& batch) {
  if (fwd.paths() != batch.paths() || fwd.steps() != batch.steps())
    throw InvalidArgument("forward state and path batch have different shapes");
}

double implicit_step(const DriverSet& d, const DriverContext& ctx, std::span<const double> z,
                     double target, double dt, const SolverConfig& cfg, std::size_t& iters) {
  if (!d.f) return target;
  const double b = d.bounds.lipschitz_y;
  if (b * dt < 1.0) {
    double y = target;
    for (std::size_t k = 0; k < cfg.max_inner; ++k) {
      const double next = target + dt * d.f(ctx, y, z);
      if (!std::isfinite(next)) throw NumericalError("implicit step produced a non-finite value");
      iters = std::max(iters, k + 1);
      if (std::abs(next - y) <= cfg.inner_tol * (1.0 + std::abs(next))) return next;
      y = next;
    }
    throw NumericalError("implicit fixed-point iteration did not converge");
  }
  if (d.monotone)
    return increasing_root([&](double y) { return y - dt * d.f(ctx, y, z) - target; }, target);
  std::ostringstream msg;
  msg << "implicit step needs lipschitz_y * dt < 1 (got " << b * dt
      << ") or a monotone driver";
  throw InvalidArgument(msg.str());
}

SolutionGrid backward_pass(const RGBDSDEProblem& pr, const ForwardState& fwd, const PathBatch& batch,
                           const SolverConfig& cfg, const SolutionGrid* frozen, bool reflect) {
  check_layout(fwd, batch);
  if (!pr.terminal) throw InvalidArgument("problem needs a terminal condition");
  if (reflect && !pr.obstacle) throw InvalidArgument("reflected solve needs an obstacle");
  const auto& dr = pr.drivers;
  const auto& grid = batch.grid();
  const auto& gi = batch.integrals();
  const std::size_t n = batch.paths(), N = batch.steps(), d = batch.dim(), l = fwd.dim();
  SolutionGrid sol(n, N, d);
  std::vector<double> push(n * N, 0.0), gap_next(n, 0.0);
  const std::vector<double> zero_z(d, 0.0);

  for_each_path(n, [&](std::size_t p) {
    const auto ctx = context(fwd, grid, p, N);
    const double xi = pr.terminal(ctx);
    if (!std::isfinite(xi)) throw NumericalError("terminal value is not finite");
    if (reflect) {
      const double s = pr.obstacle(ctx);
      if (xi < s - 1e-12 * (1.0 + std::abs(s)))
        throw InvalidArgument("terminal value lies below the obstacle at T");
    }
    sol.Y(p, N) = xi;
  });

  std::vector<std::size_t> groups;
  if (!dr.g_vanishes) {
    groups.resize(n);
    for (std::size_t p = 0; p < n; ++p) groups[p] = batch.backward_group(p);
  }

  double resid_var0 = 0.0;
  std::size_t inner_max = 0;
  Eigen::MatrixXd state(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  for (std::size_t ii = N; ii-- > 0;) {
    const std::size_t i = ii;
    const double dt = grid.dt(i);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), d > 0 ? 2 : 1);
    for_each_path(n, [&](std::size_t p) {
      const auto pi = static_cast<Eigen::Index>(p);
      const auto x = fwd.X(p, i);
      for (std::size_t c = 0; c < l; ++c) state(pi, static_cast<Eigen::Index>(c)) = x[c];
      const auto next = context(fwd, grid, p, i + 1);
      const double y1 = sol.Y(p, i + 1);
      double t = y1;
      if (dr.g) {
        const double gy = frozen ? frozen->Y(p, i + 1) : y1;
        std::span<const double> gz = zero_z;
        if (i + 1 < N) gz = frozen ? frozen->Z(p, i + 1) : sol.Z(p, i + 1);
        t += dr.g(next, gy, gz) * batch.dB(p, i);
      }
      const double dk = fwd.kappa(p, i + 1) - fwd.kappa(p, i);
      if (dr.h && dk != 0.0) t += dr.h(next, y1) * dk;
      targets(pi, 0) = t;
      if (d > 0) targets(pi, 1) = y1;
    });
    const Eigen::MatrixXd fit = conditional_expectation(state, groups, targets, cfg.regression);
    if (i == 0) {
      for (std::size_t p = 0; p < n; ++p) {
        const double r = targets(static_cast<Eigen::Index>(p), 0) - fit(static_cast<Eigen::Index>(p), 0);
        resid_var0 += r * r;
      }
      resid_var0 /= static_cast<double>(std::max<std::size_t>(n, 2) - 1);
    }
    if (d > 0) {
      Eigen::MatrixXd zt(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
      for (std::size_t p = 0; p < n; ++p) {
        const auto pi = static_cast<Eigen::Index>(p);
        const double centered = targets(pi, 1) - fit(pi, 1);
        const auto dh = batch.dH(p, i);
        for (std::size_t k = 0; k < d; ++k) zt(pi, static_cast<Eigen::Index>(k)) = centered * dh[k];
      }
      const Eigen::MatrixXd zfit = conditional_expectation(state, groups, zt, cfg.regression);
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t k = 0; k < d; ++k) {
          const double br = gi.bracket_at(i, k);
          sol.Z(p, i)[k] = br > 0.0 ? zfit(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) / br : 0.0;
        }
    }
    std::vector<std::size_t> iters(n, 0);
    for_each_path(n, [&](std::size_t p) {
      const auto ctx = context(fwd, grid, p, i);
      std::span<const double> z = d > 0 ? (frozen ? frozen->Z(p, i) : sol.Z(p, i)) : std::span<const double>{};
      if (d > 0 && !dr.f_uses_z) z = zero_z;
      double y = implicit_step(dr, ctx, z, fit(static_cast<Eigen::Index>(p), 0), dt, cfg, iters[p]);
      if (reflect) {
        const double s = pr.obstacle(ctx);
        if (y < s) {
          push[p * N + i] = s - y;
          y = s;
        }
      }
      sol.Y(p, i) = y;
    });
    for (auto k : iters) inner_max = std::max(inner_max, k);
  }

  auto& diag = sol.diagnostics;
  diag.inner_iterations_max = inner_max;
  diag.y0_residual_var = resid_var0;
  diag.min_push = 0.0;
  diag.min_gap = std::numeric_limits<double>::infinity();
  double node_sum = 0.0, trap_sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    sol.K(p, 0) = 0.0;
    for (std::size_t i = 0; i < N; ++i) sol.K(p, i + 1) = sol.K(p, i) + push[p * N + i];
    if (!reflect) continue;
    std::vector<double> gap(N + 1);
    for (std::size_t node = 0; node <= N; ++node) {
      gap[node] = sol.Y(p, node) - pr.obstacle(context(fwd, grid, p, node));
      diag.min_gap = std::min(diag.min_gap, gap[node]);
    }
    for (std::size_t i = 0; i < N; ++i) {
      const double dk = push[p * N + i];
      diag.min_push = std::min(diag.min_push, dk);
      node_sum += gap[i] * dk;
      trap_sum += 0.5 * (gap[i] + gap[i + 1]) * dk;
    }
  }
  if (!reflect) diag.min_gap = 0.0;
  diag.skorokhod_node = node_sum / static_cast<double>(n);
  diag.skorokhod_trapezoid = trap_sum / static_cast<double>(n);
  return sol;
}

double constant_a2(const DriverBounds& b) {
  return std::abs(b.lambda) + b.phi + b.phi * b.phi + b.rho + b.eta * b.eta;
}

SolutionGrid initial_guess(const RGBDSDEProblem& pr, const ForwardState& fwd, const PathBatch& batch,
                           PicardInit init) {
  SolutionGrid s(batch.paths(), batch.steps(), batch.dim());
  if (init == PicardInit::obstacle && pr.obstacle) {
    for (std::size_t p = 0; p < batch.paths(); ++p)
      for (std::size_t node = 0; node <= batch.steps(); ++node)
        s.Y(p, node) = pr.obstacle(context(fwd, batch.grid(), p, node));
  }
  return s;
}

}  // namespace

DriverSet zero_drivers() {
  DriverSet d;
  d.f = [](const DriverContext&, double, std::span<const double>) { return 0.0; };
  d.h = [](const DriverContext&, double) { return 0.0; };
  d.g = [](const DriverContext&, double, std::span<const double>) { return 0.0; };
  d.f_uses_z = false;
  d.g_uses_yz = false;
  d.g_vanishes = true;
  d.monotone = true;
  return d;
}

DriverCheckReport probe_driver_bounds(const DriverSet& dr, const ProbeBox& box, std::size_t probes,
                                      std::uint64_t seed) {
  DriverCheckReport rep;
  rep.probes = probes;
  const auto& b = dr.bounds;
  auto note = [&](const char* what, double lhs, double rhs) {
    const double tol = 1e-9 * (1.0 + std::abs(rhs));
    if (lhs > rhs + tol && rep.violations.size() < 20) {
      std::ostringstream msg;
      msg << what << ": " << lhs << " > " << rhs;
      rep.violations.push_back(msg.str());
    }
  };
  if (!(b.alpha >= 0.0 && b.alpha < 0.5)) rep.violations.push_back("alpha must lie in [0, 1/2)");
  const std::size_t l = box.x_lo.size();
  if (box.x_hi.size() != l) throw InvalidArgument("probe box bounds differ in dimension");
  std::vector<double> x(l), z(box.z_dim), zp(box.z_dim), zero(box.z_dim, 0.0);
  for (std::size_t k = 0; k < probes; ++k) {
    CounterRng rng(seed, k, 0, StreamTag::probe);
    DriverContext ctx;
    ctx.t = box.t0 + (box.t1 - box.t0) * rng.uniform();
    for (std::size_t c = 0; c < l; ++c) x[c] = box.x_lo[c] + (box.x_hi[c] - box.x_lo[c]) * rng.uniform();
    ctx.x = x;
    ctx.kappa = box.kappa_max * rng.uniform();
    const double y = box.y_max * (2.0 * rng.uniform() - 1.0);
    const double yp = box.y_max * (2.0 * rng.uniform() - 1.0);
    double gz2 = 0.0;
    for (std::size_t m = 0; m < box.z_dim; ++m) {
      z[m] = box.z_max * (2.0 * rng.uniform() - 1.0);
      zp[m] = box.z_max * (2.0 * rng.uniform() - 1.0);
      const double gam = box.gamma ? box.gamma(m, ctx.t) : 1.0;
      gz2 += gam * gam * (z[m] - zp[m]) * (z[m] - zp[m]);
    }
    const double dy = y - yp;
    if (dr.f) {
      const double fy = dr.f(ctx, y, z), fyp = dr.f(ctx, yp, z);
      note("f monotonicity", dy * (fy - fyp), b.lambda * dy * dy);
      note("f Lipschitz in y", std::abs(fy - fyp), b.lipschitz_y * std::abs(dy));
      note("f Lipschitz in z", std::abs(fy - dr.f(ctx, y, zp)), b.eta * std::sqrt(gz2));
      note("f growth", std::abs(dr.f(ctx, y, zero)), b.varphi + b.phi * std::abs(y));
    }
    if (dr.h) {
      const double hy = dr.h(ctx, y), hyp = dr.h(ctx, yp);
      note("h monotonicity", dy * (hy - hyp), b.varrho * dy * dy);
      note("h growth", std::abs(hy), b.psi + b.zeta * std::abs(y));
    }
    if (dr.g) {
      const double dg = dr.g(ctx, y, z) - dr.g(ctx, yp, zp);
      note("g Lipschitz", dg * dg, b.rho * dy * dy + b.alpha * gz2);
    }
  }
  return rep;
}

void check_driver_bounds(const DriverSet& drivers, const ProbeBox& box, std::size_t probes,
                         std::uint64_t seed) {
  const auto rep = probe_driver_bounds(drivers, box, probes, seed);
  if (!rep.ok()) throw InvalidArgument("declared driver bound violated: " + rep.violations.front());
}

double yosida_resolvent(const ScalarMap& phi, double y, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("Yosida parameter delta must be positive");
  return increasing_root([&](double J) { return J - delta * phi(J) - y; }, y);
}

double yosida_apply(const ScalarMap& phi, double y, double delta) {
  return (yosida_resolvent(phi, y, delta) - y) / delta;
}

DriverSet yosida_regularize(const DriverSet& drivers, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("Yosida parameter delta must be positive");
  DriverSet out = drivers;
  if (drivers.f) {
    out.f = [f = drivers.f, delta](const DriverContext& ctx, double y, std::span<const double> z) {
      return yosida_apply([&](double u) { return f(ctx, u, z); }, y, delta);
    };
  }
  if (drivers.h) {
    out.h = [h = drivers.h, delta](const DriverContext& ctx, double y) {
      return yosida_apply([&](double u) { return h(ctx, u); }, y, delta);
    };
  }
  out.bounds.lipschitz_y = 1.0 / delta;
  out.monotone = true;
  return out;
}

namespace {
double cap(double v, double p) {
  const double a = std::abs(v);
  return a == 0.0 ? 0.0 : std::min(a, p) / a * v;
}
}  // namespace

DriverFn truncate_generator(const DriverFn& f, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("truncation level p must be at least 1");
  return [f, p](const DriverContext& ctx, double y, std::span<const double> z) {
    const double f0 = f(ctx, 0.0, z);
    return f(ctx, y, z) - f0 + cap(f0, p);
  };
}

BoundaryFn truncate_generator(const BoundaryFn& h, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("truncation level p must be at least 1");
  return [h, p](const DriverContext& ctx, double y) {
    const double h0 = h(ctx, 0.0);
    return h(ctx, y) - h0 + cap(h0, p);
  };
}

ForwardState ForwardState::none(const PathBatch& batch) {
  ForwardState s;
  s.paths_ = batch.paths();
  s.steps_ = batch.steps();
  s.dim_ = 0;
  s.kappa_.assign(s.paths_ * (s.steps_ + 1), 0.0);
  return s;
}

ForwardState ForwardState::levy(const PathBatch& batch) {
  ForwardState s = none(batch);
  s.dim_ = 1;
  s.x_.resize(s.paths_ * (s.steps_ + 1));
  for (std::size_t p = 0; p < s.paths_; ++p)
    for (std::size_t node = 0; node <= s.steps_; ++node) s.x_[p * (s.steps_ + 1) + node] = batch.L(p, node);
  return s;
}

ForwardState ForwardState::reflected(const ReflectedBatch& refl) {
  ForwardState s;
  s.paths_ = refl.paths();
  s.steps_ = refl.steps();
  s.dim_ = refl.dim();
  s.x_ = refl.X_data();
  s.kappa_ = refl.kappa_data();
  return s;
}

ForwardState ForwardState::with_kappa(const TimeGrid& grid, const std::function<double(double)>& kappa) const {
  if (grid.steps() != steps_) throw InvalidArgument("kappa grid does not match the forward state");
  ForwardState s = *this;
  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> values(steps_ + 1);
  for (std::size_t node = 0; node <= steps_; ++node) {
    values[node] = kappa(grid.node(node));
    if (!(values[node] >= prev)) throw InvalidArgument("deterministic kappa must be nondecreasing");
    prev = values[node];
  }
  for (std::size_t p = 0; p < paths_; ++p)
    for (std::size_t node = 0; node <= steps_; ++node)
      s.kappa_[p * (steps_ + 1) + node] = values[node] - values[0];
  return s;
}

SolutionGrid::SolutionGrid(std::size_t paths, std::size_t steps, std::size_t dim)
    : paths_(paths), steps_(steps), dim_(dim), y_(paths * (steps + 1), 0.0),
      k_(paths * (steps + 1), 0.0), z_(paths * steps * dim, 0.0) {}

double SolutionGrid::Y0_mean() const {
  double s = 0.0;
  for (std::size_t p = 0; p < paths_; ++p) s += Y(p, 0);
  return s / static_cast<double>(paths_);
}

double SolutionGrid::Y0_se() const {
  if (paths_ < 2) return 0.0;
  const double m = Y0_mean();
  double v = 0.0;
  for (std::size_t p = 0; p < paths_; ++p) v += (Y(p, 0) - m) * (Y(p, 0) - m);
  v /= static_cast<double>(paths_ - 1);
  return std::sqrt((v + diagnostics.y0_residual_var) / static_cast<double>(paths_));
}

SolutionGrid solve_lipschitz(const RGBDSDEProblem& problem, const ForwardState& fwd,
                             const PathBatch& batch, const SolverConfig& config) {
  return backward_pass(problem, fwd, batch, config, nullptr, false);
}

SolutionGrid solve_reflected(const RGBDSDEProblem& problem, const ForwardState& fwd,
                             const PathBatch& batch, const SolverConfig& config) {
  return backward_pass(problem, fwd, batch, config, nullptr, true);
}

SolutionGrid picard_solve(const RGBDSDEProblem& problem, const ForwardState& fwd,
                          const PathBatch& batch, const SolverConfig& config) {
  const bool reflect = static_cast<bool>(problem.obstacle);
  const auto& dr = problem.drivers;
  if (!dr.f_uses_z && !dr.g_uses_yz) {
    auto sol = backward_pass(problem, fwd, batch, config, nullptr, reflect);
    sol.diagnostics.picard_residuals = {0.0};
    sol.diagnostics.iterations = 1;
    sol.diagnostics.converged = true;
    return sol;
  }
  const WeightProcess w(std::max(constant_a2(dr.bounds), config.epsilon), fwd, batch.grid(),
                        config.theta, config.mu);
  SolutionGrid prev = initial_guess(problem, fwd, batch, config.picard_init);
  std::vector<double> history;
  for (std::size_t it = 1; it <= config.picard_max_iters; ++it) {
    auto next = backward_pass(problem, fwd, batch, config, &prev, reflect);
    const double r = weighted_distance(next, prev, w, fwd, batch);
    history.push_back(r);
    prev = std::move(next);
    if (r <= config.picard_tol) break;
  }
  prev.diagnostics.picard_residuals = history;
  prev.diagnostics.iterations = history.size();
  prev.diagnostics.converged = !history.empty() && history.back() <= config.picard_tol;
  return prev;
}

SolutionGrid solve_yosida(const RGBDSDEProblem& problem, double delta, const ForwardState& fwd,
                          const PathBatch& batch, const SolverConfig& config) {
  RGBDSDEProblem reg = problem;
  reg.drivers = yosida_regularize(problem.drivers, delta);
  return picard_solve(reg, fwd, batch, config);
}

WeightProcess::WeightProcess(const DriverBounds& bounds, const ForwardState& fwd, const TimeGrid& grid,
                             double theta, double mu, double epsilon)
    : WeightProcess(constant_a2(bounds), fwd, grid, theta, mu) {
  if (a2_ < epsilon) {
    std::ostringstream msg;
    msg << "weight a^2 = " << a2_ << " is below epsilon = " << epsilon;
    throw InvalidArgument(msg.str());
  }
}

WeightProcess::WeightProcess(double a2, const ForwardState& fwd, const TimeGrid& grid, double theta,
                             double mu)
    : a2_(a2), theta_(theta), mu_(mu), steps_(fwd.steps()) {
  if (!(theta > 0.0) || !(mu > 0.0)) throw InvalidArgument("weights need theta, mu > 0");
  if (grid.steps() != steps_) throw InvalidArgument("weight grid does not match the forward state");
  v_.resize(steps_ + 1);
  for (std::size_t node = 0; node <= steps_; ++node) v_[node] = a2_ * (grid.node(node) - grid.start());
  phi_.resize(fwd.paths() * (steps_ + 1));
  for (std::size_t p = 0; p < fwd.paths(); ++p)
    for (std::size_t node = 0; node <= steps_; ++node)
      phi_[p * (steps_ + 1) + node] = std::exp(theta_ * v_[node] + mu_ * fwd.kappa(p, node));
}

namespace {

double h2q_sum(const SolutionGrid& a, const SolutionGrid* b, const WeightProcess& w,
               const ForwardState& fwd, std::size_t p) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.steps(); ++i) {
    const double y = a.Y(p, i) - (b ? b->Y(p, i) : 0.0);
    const double dq = (w.V(i + 1) - w.V(i)) + (fwd.kappa(p, i + 1) - fwd.kappa(p, i));
    s += w.Phi(p, i) * y * y * dq;
  }
  return s;
}

double h2l2_sum(const SolutionGrid& a, const SolutionGrid* b, const WeightProcess& w,
                const PathBatch& batch, std::size_t p) {
  double s = 0.0;
  const auto& gi = batch.integrals();
  for (std::size_t i = 0; i < a.steps(); ++i) {
    double zz = 0.0;
    for (std::size_t k = 0; k < a.dim(); ++k) {
      const double z = a.Z(p, i)[k] - (b ? b->Z(p, i)[k] : 0.0);
      zz += z * z * gi.bracket_at(i, k);
    }
    s += w.Phi(p, i) * zz;
  }
  return s;
}

void check_norm_inputs(const SolutionGrid& s, const ForwardState& fwd, const PathBatch& batch) {
  if (s.paths() != batch.paths() || s.steps() != batch.steps() || s.dim() != batch.dim())
    throw InvalidArgument("solution does not match the path batch");
  check_layout(fwd, batch);
}

}  // namespace

NormReport weighted_norms(const SolutionGrid& sol, const WeightProcess& w, const ForwardState& fwd,
                          const PathBatch& batch) {
  check_norm_inputs(sol, fwd, batch);
  NormReport r;
  const auto n = static_cast<double>(sol.paths());
  for (std::size_t p = 0; p < sol.paths(); ++p) {
    double sup = 0.0;
    for (std::size_t node = 0; node <= sol.steps(); ++node)
      sup = std::max(sup, w.Phi(p, node) * sol.Y(p, node) * sol.Y(p, node));
    r.S2 += sup / n;
    r.H2Q += h2q_sum(sol, nullptr, w, fwd, p) / n;
    r.H2l2 += h2l2_sum(sol, nullptr, w, batch, p) / n;
    const double kT = sol.K(p, sol.steps());
    r.K2 += kT * kT / n;
  }
  return r;
}

double weighted_distance(const SolutionGrid& a, const SolutionGrid& b, const WeightProcess& w,
                         const ForwardState& fwd, const PathBatch& batch) {
  check_norm_inputs(a, fwd, batch);
  check_norm_inputs(b, fwd, batch);
  double s = 0.0;
  for (std::size_t p = 0; p < a.paths(); ++p) s += h2q_sum(a, &b, w, fwd, p) + h2l2_sum(a, &b, w, batch, p);
  return std::sqrt(s / static_cast<double>(a.paths()));
}

AprioriReport apriori_check(const RGBDSDEProblem& problem, const SolutionGrid& sol,
                            const WeightProcess& w, const ForwardState& fwd, const PathBatch& batch) {
  const auto& b = problem.drivers.bounds;
  if (!(b.alpha >= 0.0 && b.alpha < 0.5)) throw InvalidArgument("alpha must lie in [0, 1/2)");
  const double theta_min = 4.0 + 2.0 / (1.0 - 2.0 * b.alpha);
  if (!(w.theta() > theta_min)) {
    std::ostringstream msg;
    msg << "theta = " << w.theta() << " is not admissible; need theta > " << theta_min;
    throw InvalidArgument(msg.str());
  }
  const auto norms = weighted_norms(sol, w, fwd, batch);
  AprioriReport rep;
  rep.lhs = norms.total();
  const auto& grid = batch.grid();
  const std::size_t N = sol.steps();
  const auto n = static_cast<double>(sol.paths());
  const double a = std::sqrt(w.a2());
  const std::vector<double> zero_z(batch.dim(), 0.0);
  for (std::size_t p = 0; p < sol.paths(); ++p) {
    const auto ctxT = context(fwd, grid, p, N);
    const double xi = problem.terminal(ctxT);
    double s = w.Phi(p, N) * xi * xi;
    double sup_obstacle = 0.0;
    for (std::size_t i = 0; i <= N; ++i) {
      const auto ctx = context(fwd, grid, p, i);
      if (problem.obstacle) {
        const double sp = std::max(problem.obstacle(ctx), 0.0) * w.Phi(p, i);
        sup_obstacle = std::max(sup_obstacle, sp * sp);
      }
      if (i == N) break;
      const double dt = grid.dt(i);
      const double dk = fwd.kappa(p, i + 1) - fwd.kappa(p, i);
      s += w.Phi(p, i) * (b.varphi / a) * (b.varphi / a) * dt;
      s += w.Phi(p, i) * b.psi * b.psi * dk;
      if (problem.drivers.g) {
        const double g0 = problem.drivers.g(ctx, 0.0, zero_z);
        s += w.Phi(p, i) * g0 * g0 * dt;
      }
    }
    rep.rhs_data += (s + sup_obstacle) / n;
  }
  rep.finite = std::isfinite(rep.lhs) && std::isfinite(rep.rhs_data);
  if (rep.lhs == 0.0 && rep.rhs_data == 0.0) {
    rep.trivial = true;
    rep.ratio = 0.0;
  } else {
    rep.ratio = rep.lhs / rep.rhs_data;
  }
  return rep;
}

ComparisonReport compare_solutions(const RGBDSDEProblem& p1, const RGBDSDEProblem& p2,
                                   const ForwardState& fwd, const PathBatch& batch,
                                   const SolverConfig& config) {
  check_layout(fwd, batch);
  const auto& grid = batch.grid();
  const std::size_t N = batch.steps(), n = batch.paths(), d = batch.dim();
  for (std::size_t p = 0; p < n; ++p) {
    const auto ctx = context(fwd, grid, p, N);
    if (p1.terminal(ctx) > p2.terminal(ctx) + 1e-12)
      throw InvalidArgument("comparison needs xi1 <= xi2 on every path");
  }
  if (p1.drivers.f && p2.drivers.f) {
    std::vector<double> z(d);
    for (std::size_t k = 0; k < 1000; ++k) {
      CounterRng rng(0xc0ffee, k, 0, StreamTag::probe);
      const auto p = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
      const auto node = static_cast<std::size_t>(rng.uniform() * static_cast<double>(N)) % N;
      const double y = 4.0 * rng.uniform() - 2.0;
      for (auto& v : z) v = 4.0 * rng.uniform() - 2.0;
      const auto ctx = context(fwd, grid, p, node);
      if (p1.drivers.f(ctx, y, z) > p2.drivers.f(ctx, y, z) + 1e-12)
        throw InvalidArgument("comparison needs f1 <= f2 on probes");
    }
  }
  ComparisonReport rep;
  rep.first = picard_solve(p1, fwd, batch, config);
  rep.second = picard_solve(p2, fwd, batch, config);
  double mean = 0.0, var = 0.0;
  for (std::size_t p = 0; p < n; ++p) mean += rep.second.Y(p, 0) - rep.first.Y(p, 0);
  mean /= static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double dd = rep.second.Y(p, 0) - rep.first.Y(p, 0) - mean;
    var += dd * dd;
  }
  const double se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  rep.y0_gap = mean;
  rep.tolerance = 3.0 * se + 1e-12 * (1.0 + std::abs(mean));
  rep.min_gap = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t node = 0; node <= N; ++node) {
      const double gap = rep.second.Y(p, node) - rep.first.Y(p, node);
      rep.min_gap = std::min(rep.min_gap, gap);
      if (-gap > rep.tolerance) ++bad;
    }
  rep.violation_fraction = static_cast<double>(bad) / static_cast<double>(n * (N + 1));
  return rep;
}

RGBDSDEProblem exponential_change(const RGBDSDEProblem& problem, double lambda, double mu) {
  auto A = [lambda, mu](const DriverContext& ctx) { return lambda * ctx.t + mu * ctx.kappa; };
  RGBDSDEProblem out = problem;
  out.terminal = [A, xi = problem.terminal](const DriverContext& ctx) { return std::exp(A(ctx)) * xi(ctx); };
  if (problem.obstacle)
    out.obstacle = [A, s = problem.obstacle](const DriverContext& ctx) { return std::exp(A(ctx)) * s(ctx); };
  const auto scaled = [A](const DriverFn& fn) -> DriverFn {
    if (!fn) return fn;
    return [A, fn](const DriverContext& ctx, double y, std::span<const double> z) {
      const double e = std::exp(A(ctx));
      std::vector<double> zs(z.begin(), z.end());
      for (auto& v : zs) v /= e;
      return e * fn(ctx, y / e, zs);
    };
  };
  auto& dr = out.drivers;
  const auto f_scaled = scaled(problem.drivers.f);
  dr.f = [f_scaled, lambda](const DriverContext& ctx, double y, std::span<const double> z) {
    return (f_scaled ? f_scaled(ctx, y, z) : 0.0) - lambda * y;
  };
  dr.g = scaled(problem.drivers.g);
  const auto h = problem.drivers.h;
  dr.h = [A, h, mu](const DriverContext& ctx, double y) {
    const double e = std::exp(A(ctx));
    return (h ? e * h(ctx, y / e) : 0.0) - mu * y;
  };
  dr.bounds.lambda -= lambda;
  dr.bounds.varrho -= mu;
  dr.bounds.lipschitz_y += std::abs(lambda);
  return out;
}

SolutionGrid exponential_restore(const SolutionGrid& transformed, double lambda, double mu,
                                 const ForwardState& fwd, const PathBatch& batch) {
  check_norm_inputs(transformed, fwd, batch);
  SolutionGrid out(transformed.paths(), transformed.steps(), transformed.dim());
  out.diagnostics = transformed.diagnostics;
  const auto& grid = batch.grid();
  for (std::size_t p = 0; p < out.paths(); ++p) {
    for (std::size_t node = 0; node <= out.steps(); ++node) {
      const double e = std::exp(-(lambda * grid.node(node) + mu * fwd.kappa(p, node)));
      out.Y(p, node) = e * transformed.Y(p, node);
      if (node < out.steps())
        for (std::size_t k = 0; k < out.dim(); ++k) out.Z(p, node)[k] = e * transformed.Z(p, node)[k];
      if (node > 0) {
        const double dK = transformed.K(p, node) - transformed.K(p, node - 1);
        const double eprev = std::exp(-(lambda * grid.node(node - 1) + mu * fwd.kappa(p, node - 1)));
        out.K(p, node) = out.K(p, node - 1) + eprev * dK;
      }
    }
  }
  return out;
}

ResidualStats backward_residuals(const RGBDSDEProblem& problem, const SolutionGrid& sol,
                                 const ForwardState& fwd, const PathBatch& batch) {
  check_norm_inputs(sol, fwd, batch);
  const auto& dr = problem.drivers;
  const auto& grid = batch.grid();
  const std::size_t N = sol.steps(), n = sol.paths(), d = sol.dim();
  const std::vector<double> zero_z(d, 0.0);
  ResidualStats st;
  st.mean.assign(N, 0.0);
  st.se.assign(N, 0.0);
  std::vector<double> r(n), m(n);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      const auto ctx = context(fwd, grid, p, i);
      const auto next = context(fwd, grid, p, i + 1);
      const auto z = sol.Z(p, i);
      double v = sol.Y(p, i) - sol.Y(p, i + 1);
      if (dr.f) v -= dr.f(ctx, sol.Y(p, i), dr.f_uses_z ? z : std::span<const double>(zero_z)) * grid.dt(i);
      const double dk = fwd.kappa(p, i + 1) - fwd.kappa(p, i);
      if (dr.h && dk != 0.0) v -= dr.h(next, sol.Y(p, i + 1)) * dk;
      if (dr.g) v -= dr.g(next, sol.Y(p, i + 1), i + 1 < N ? sol.Z(p, i + 1) : std::span<const double>(zero_z)) *
                     batch.dB(p, i);
      v -= sol.K(p, i + 1) - sol.K(p, i);
      const auto dh = batch.dH(p, i);
      double mart = 0.0;
      for (std::size_t k = 0; k < d; ++k) mart += z[k] * dh[k];
      r[p] = v + mart;
      m[p] = mart;
    }
    // The fitted conditional expectation absorbs the sample mean of the target, so the
    // residual mean inherits the sampling error of the martingale term.
    const auto var = [n](const std::vector<double>& v) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
      double s = 0.0;
      for (double x : v) s += (x - mean) * (x - mean);
      return n > 1 ? s / static_cast<double>(n - 1) : 0.0;
    };
    st.mean[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    st.se[i] = std::sqrt((var(r) + var(m)) / static_cast<double>(n));
  }
  return st;
}

}  // namespace lbds
