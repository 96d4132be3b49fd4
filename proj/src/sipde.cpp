#include "lbds/sipde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "lbds/error.hpp"

namespace lbds {

namespace {

SigmaField sigma_field(const ScalarSigma& s) {
  return [s](std::span<const double> x, std::span<double> out) { out[0] = s(x[0]); };
}

std::size_t locate(const std::vector<double>& g, double v) {
  auto it = std::upper_bound(g.begin(), g.end(), v);
  const auto k = static_cast<std::size_t>(it - g.begin());
  return std::clamp<std::size_t>(k, 1, g.size() - 1) - 1;
}

double lerp_profile(const std::vector<double>& u, double a, double h, double x) {
  const double s = (x - a) / h;
  const auto n = u.size() - 1;
  auto k = static_cast<std::size_t>(std::clamp(std::floor(s), 0.0, static_cast<double>(n - 1)));
  const double w = s - static_cast<double>(k);
  return (1.0 - w) * u[k] + w * u[k + 1];
}

DriverContext point_context(double t, std::span<const double> x) { return DriverContext{t, 0, 0, x, 0.0}; }

}  // namespace

SIPDECheck validate_sipde(const SIPDEProblem& pr, std::size_t samples) {
  if (pr.domain.kind() != DomainKind::interval) throw InvalidArgument("the SIPDE module works on an interval");
  if (!pr.sigma || !pr.terminal) throw InvalidArgument("SIPDE needs sigma and a terminal function");
  const double T = pr.chars.horizon();
  for (std::size_t k = 0; k <= 64; ++k) {
    const double t = T * static_cast<double>(k) / 64.0;
    if (pr.chars.diffusion()(t) != 0.0) {
      std::ostringstream msg;
      msg << "the SIPDE forward process has no Brownian part, but c(" << t << ") = " << pr.chars.diffusion()(t);
      throw InvalidArgument(msg.str());
    }
  }
  for (const auto& a : pr.chars.atoms())
    if (std::abs(a.size) > 1.0) {
      std::ostringstream msg;
      msg << "the SIPDE forward process needs |e| <= 1, got e = " << a.size;
      throw InvalidArgument(msg.str());
    }
  validate_jump_invariance(pr.domain, pr.chars, sigma_field(pr.sigma), samples);
  SIPDECheck out;
  out.max_terminal_gap = -std::numeric_limits<double>::infinity();
  const double a = pr.domain.lower(), b = pr.domain.upper();
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = a + (b - a) * static_cast<double>(k) / static_cast<double>(samples - 1);
    const double H = pr.terminal(x);
    if (pr.obstacle) {
      const double gap = pr.obstacle(T, x) - H;
      out.max_terminal_gap = std::max(out.max_terminal_gap, gap);
      if (gap > 1e-12 * (1.0 + std::abs(H))) {
        std::ostringstream msg;
        msg << "obstacle exceeds the terminal function at x = " << x << " (S = " << pr.obstacle(T, x)
            << ", H = " << H << ")";
        throw InvalidArgument(msg.str());
      }
    }
    const double ratio = std::abs(H) / (pr.growth_C * (1.0 + std::pow(std::abs(x), pr.growth_p)));
    out.max_growth_ratio = std::max(out.max_growth_ratio, ratio);
    if (ratio > 1.0) {
      std::ostringstream msg;
      msg << "terminal function breaks its growth bound at x = " << x;
      throw InvalidArgument(msg.str());
    }
  }
  if (!pr.obstacle) out.max_terminal_gap = 0.0;
  return out;
}

double SolutionField::interpolate(double tq, double xq) const {
  const double eps = 1e-12;
  if (tq < t.front() - eps || tq > t.back() + eps || xq < x.front() - eps || xq > x.back() + eps) {
    std::ostringstream msg;
    msg << "(" << tq << ", " << xq << ") lies outside the field";
    throw InvalidArgument(msg.str());
  }
  double wt = 0.0, wx = 0.0;
  std::size_t i = 0, j = 0;
  if (t.size() > 1) {
    i = locate(t, tq);
    wt = std::clamp((tq - t[i]) / (t[i + 1] - t[i]), 0.0, 1.0);
  }
  if (x.size() > 1) {
    j = locate(x, xq);
    wx = std::clamp((xq - x[j]) / (x[j + 1] - x[j]), 0.0, 1.0);
  }
  const std::size_t i1 = std::min(i + 1, t.size() - 1), j1 = std::min(j + 1, x.size() - 1);
  return (1 - wt) * ((1 - wx) * at(i, j) + wx * at(i, j1)) + wt * ((1 - wx) * at(i1, j) + wx * at(i1, j1));
}

double SolutionField::continuity_modulus() const {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j + 1 < x.size() && std::isfinite(at(i, j)) && std::isfinite(at(i, j + 1)))
        m = std::max(m, std::abs(at(i, j + 1) - at(i, j)));
      if (i + 1 < t.size() && std::isfinite(at(i, j)) && std::isfinite(at(i + 1, j)))
        m = std::max(m, std::abs(at(i + 1, j) - at(i, j)));
    }
  return m;
}

SolutionField mc_representation(const SIPDEProblem& pr, const std::vector<double>& t,
                                const std::vector<double>& x, const MonteCarloConfig& cfg) {
  validate_sipde(pr);
  if (t.empty() || x.empty()) throw InvalidArgument("empty (t, x) grid");
  if (cfg.paths < 2 || cfg.steps == 0) throw InvalidArgument("Monte Carlo needs >= 2 paths and >= 1 step");
  const double T = pr.chars.horizon();
  const auto basis = build_basis(pr.chars);
  const auto sigma = sigma_field(pr.sigma);
  SolutionField out;
  out.t = t;
  out.x = x;
  out.u.assign(t.size() * x.size(), std::numeric_limits<double>::quiet_NaN());
  out.se.assign(t.size() * x.size(), 0.0);
  out.failures.assign(t.size() * x.size(), "");
  out.paths = cfg.paths;
  out.steps = cfg.steps;
  out.seed = cfg.seed;

  RGBDSDEProblem bp;
  bp.terminal = [&pr](const DriverContext& c) { return pr.terminal(c.x[0]); };
  bp.drivers = pr.drivers;
  if (pr.obstacle) bp.obstacle = [&pr](const DriverContext& c) { return pr.obstacle(c.t, c.x[0]); };

  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0.0 || t[i] > T) throw InvalidArgument("representation time outside [0, T]");
    for (std::size_t j = 0; j < x.size(); ++j) {
      const std::size_t k = i * x.size() + j;
      const double xj[1] = {x[j]};
      if (!pr.domain.contains(xj, 1e-12)) throw InvalidArgument("representation point outside the domain");
      if (T - t[i] <= 1e-12 * T) {
        out.u[k] = pr.terminal(x[j]);
        continue;
      }
      try {
        const auto steps = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(static_cast<double>(cfg.steps) * (T - t[i]) - 1e-9)));
        BatchOptions opt;
        opt.backward_groups = pr.drivers.g_vanishes ? 0 : std::max<std::size_t>(cfg.backward_groups, 1);
        const auto batch = simulate_batch(pr.chars, basis, TimeGrid::uniform(t[i], T, steps), cfg.paths,
                                          cfg.seed, opt);
        const auto refl = solve_paths(pr.domain, pr.chars, sigma, {0, {x[j]}}, batch);
        const auto sol = picard_solve(bp, ForwardState::reflected(refl), batch, cfg.solver);
        out.u[k] = sol.Y0_mean();
        out.se[k] = sol.Y0_se();
        if (!sol.diagnostics.converged) out.failures[k] = "Picard iteration did not converge";
      } catch (const std::exception& e) {
        out.failures[k] = e.what();
      }
    }
  }
  return out;
}

Profile::Profile(std::vector<double> x, std::vector<double> u) : x_(std::move(x)), u_(std::move(u)) {
  if (x_.size() < 4 || x_.size() != u_.size()) throw InvalidArgument("profile needs >= 4 matching points");
  h_ = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (std::abs(x_[i] - x_[i - 1] - h_) > 1e-9 * h_) throw InvalidArgument("profile grid must be uniform");
}

Profile Profile::from(const std::function<double(double)>& fn, double a, double b, std::size_t n) {
  std::vector<double> x(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    u[i] = fn(x[i]);
  }
  return Profile(std::move(x), std::move(u));
}

double Profile::operator()(double x) const {
  const double tol = 1e-12 * (1.0 + std::abs(x));
  if (x < x_.front() - tol || x > x_.back() + tol) {
    std::ostringstream msg;
    msg << "x = " << x << " lies outside the tabulated profile";
    throw InvalidArgument(msg.str());
  }
  const std::size_t n = x_.size();
  const double s = (x - x_.front()) / h_;
  auto k = static_cast<std::size_t>(std::clamp(std::floor(s), 0.0, static_cast<double>(n - 2)));
  std::size_t lo = k >= 1 ? k - 1 : 0;
  lo = std::min(lo, n - 4);
  double v = 0.0;
  for (std::size_t a = lo; a < lo + 4; ++a) {
    double w = 1.0;
    for (std::size_t b = lo; b < lo + 4; ++b)
      if (b != a) w *= (x - x_[b]) / (x_[a] - x_[b]);
    v += w * u_[a];
  }
  return v;
}

double Profile::derivative(double x) const {
  const double h = h_;
  if (x - h >= x_.front() && x + h <= x_.back()) return ((*this)(x + h) - (*this)(x - h)) / (2.0 * h);
  if (x + 2.0 * h <= x_.back()) return (-3.0 * (*this)(x) + 4.0 * (*this)(x + h) - (*this)(x + 2.0 * h)) / (2.0 * h);
  return (3.0 * (*this)(x) - 4.0 * (*this)(x - h) + (*this)(x - 2.0 * h)) / (2.0 * h);
}

double generator_apply(const SIPDEProblem& pr, const Profile& u, double t, double x) {
  const double s = pr.sigma(x), du = u.derivative(x), ux = u(x);
  double v = pr.chars.drift()(t) * s * du;
  for (const auto& a : pr.chars.atoms()) {
    const double xe = x + s * a.size;
    const double pt[1] = {xe};
    if (!pr.domain.contains(pt, 1e-12)) {
      std::ostringstream msg;
      msg << "shifted point " << xe << " leaves the domain";
      throw InvalidArgument(msg.str());
    }
    v += (u(xe) - ux - du * s * a.size) * a.intensity(t);
  }
  return v;
}

std::vector<double> u1k_terms(const SIPDEProblem& pr, const MartingaleBasis& basis, const Profile& u, double t,
                              double x) {
  const std::size_t d = basis.dimension();
  std::vector<double> out(d, 0.0);
  const double s = pr.sigma(x), du = u.derivative(x), ux = u(x);
  for (const auto& a : pr.chars.atoms()) {
    const double xe = x + s * a.size;
    const double pt[1] = {xe};
    if (!pr.domain.contains(pt, 1e-12)) {
      std::ostringstream msg;
      msg << "shifted point " << xe << " leaves the domain";
      throw InvalidArgument(msg.str());
    }
    const double diff = (u(xe) - ux - du * a.size) * a.intensity(t);
    for (std::size_t k = 0; k < d; ++k) out[k] += diff * basis.p(k, a.size);
  }
  return out;
}

SolutionField fd_obstacle_solve(const SIPDEProblem& pr, const FDConfig& cfg) {
  validate_sipde(pr);
  if (pr.drivers.g && !pr.drivers.g_vanishes) throw InvalidArgument("the finite-difference oracle needs g = 0");
  if (cfg.space_cells < 4 || cfg.time_steps < 1) throw InvalidArgument("FD grid too small");
  const double T = pr.chars.horizon(), a = pr.domain.lower(), b = pr.domain.upper();
  const auto atoms = pr.chars.atoms();
  const auto basis = build_basis(pr.chars);
  const std::size_t d = basis.dimension();

  std::size_t K = cfg.time_steps;
  const auto cfl = [&](std::size_t steps) {
    const double dt = T / static_cast<double>(steps);
    double worst = 0.0;
    for (std::size_t n = 0; n <= steps; ++n) {
      double lam = 0.0;
      for (const auto& at : atoms) lam += at.intensity(dt * static_cast<double>(n));
      worst = std::max(worst, dt * lam);
    }
    return worst;
  };
  if (cfl(K) > 1.0) K *= 2;
  if (cfl(K) > 1.0) {
    std::ostringstream msg;
    msg << "explicit nonlocal term violates the CFL bound (dt * sum lambda = " << cfl(K) << ")";
    throw NumericalError(msg.str());
  }

  const std::size_t M = cfg.space_cells;
  const double h = (b - a) / static_cast<double>(M), dt = T / static_cast<double>(K);
  SolutionField out;
  out.x.resize(M + 1);
  out.t.resize(K + 1);
  for (std::size_t i = 0; i <= M; ++i) out.x[i] = a + h * static_cast<double>(i);
  out.x.back() = b;
  for (std::size_t n = 0; n <= K; ++n) out.t[n] = dt * static_cast<double>(n);
  out.t.back() = T;
  out.u.assign((K + 1) * (M + 1), 0.0);
  out.se.assign((K + 1) * (M + 1), 0.0);
  out.failures.assign((K + 1) * (M + 1), "");
  out.steps = K;

  std::vector<double> sig(M + 1);
  for (std::size_t i = 0; i <= M; ++i) sig[i] = pr.sigma(out.x[i]);
  std::vector<double> prev(M + 1), next(M + 1), z(d);
  for (std::size_t i = 0; i <= M; ++i) prev[i] = out.at(K, i) = pr.terminal(out.x[i]);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(M + 1));
  const auto& dr = pr.drivers;
  for (std::size_t n = K; n-- > 0;) {
    const double t = out.t[n];
    double jump_drift = 0.0;
    for (const auto& at : atoms) jump_drift += at.size * at.intensity(t);
    const double drift = pr.chars.drift()(t) - jump_drift;
    trip.clear();
    for (std::size_t i = 0; i <= M; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double xi[1] = {out.x[i]};
      const auto ctx = point_context(t, xi);
      const double v = drift * sig[i];
      const bool at_a = i == 0, at_b = i == M;
      if ((at_a && v < 0.0) || (at_b && v > 0.0)) {
        // Neumann row: <D_x u, grad Psi> + h(u) = 0, grad Psi = +1 at a and -1 at b
        const double h0 = dr.h ? dr.h(ctx, prev[i]) : 0.0;
        const double e = 1e-7 * (1.0 + std::abs(prev[i]));
        const double hy = dr.h ? (dr.h(ctx, prev[i] + e) - dr.h(ctx, prev[i] - e)) / (2.0 * e) : 0.0;
        const Eigen::Index s1 = at_a ? 1 : -1;
        trip.emplace_back(ii, ii, -3.0 / (2.0 * h) + hy);
        trip.emplace_back(ii, ii + s1, 4.0 / (2.0 * h));
        trip.emplace_back(ii, ii + 2 * s1, -1.0 / (2.0 * h));
        rhs(ii) = -h0 + hy * prev[i];
        continue;
      }
      double nonlocal = 0.0;
      const double dprev = at_a ? (-3 * prev[0] + 4 * prev[1] - prev[2]) / (2 * h)
                           : at_b ? (3 * prev[M] - 4 * prev[M - 1] + prev[M - 2]) / (2 * h)
                                  : (prev[i + 1] - prev[i - 1]) / (2 * h);
      std::fill(z.begin(), z.end(), 0.0);
      for (const auto& at : atoms) {
        const double lam = at.intensity(t);
        const double shifted = lerp_profile(prev, a, h, std::clamp(out.x[i] + sig[i] * at.size, a, b));
        nonlocal += (shifted - prev[i]) * lam;
        for (std::size_t k = 0; k < d; ++k)
          z[k] += (shifted - prev[i] - dprev * at.size) * basis.p(k, at.size) * lam;
      }
      double f0 = 0.0, fy = 0.0;
      if (dr.f) {
        f0 = dr.f(ctx, prev[i], z);
        const double e = 1e-7 * (1.0 + std::abs(prev[i]));
        fy = (dr.f(ctx, prev[i] + e, z) - dr.f(ctx, prev[i] - e, z)) / (2.0 * e);
      }
      double diag = 1.0 - dt * fy;
      if (v > 0.0 && !at_b) {
        diag += dt * v / h;
        trip.emplace_back(ii, ii + 1, -dt * v / h);
      } else if (v < 0.0 && !at_a) {
        diag -= dt * v / h;
        trip.emplace_back(ii, ii - 1, dt * v / h);
      }
      trip.emplace_back(ii, ii, diag);
      rhs(ii) = prev[i] + dt * (nonlocal + f0 - fy * prev[i]);
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(M + 1));
    A.setFromTriplets(trip.begin(), trip.end());
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw NumericalError("finite-difference system is singular");
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i <= M; ++i) {
      double v = sol(static_cast<Eigen::Index>(i));
      if (pr.obstacle) v = std::max(v, pr.obstacle(t, out.x[i]));
      if (!std::isfinite(v)) throw NumericalError("finite-difference solution is not finite");
      next[i] = v;
      out.at(n, i) = v;
    }
    prev.swap(next);
  }
  return out;
}

CompareReport compare_report(const SolutionField& mc, const SolutionField& fd, double scheme_tol) {
  CompareReport rep;
  rep.scheme_tol = scheme_tol;
  double worst = -1.0;
  for (std::size_t i = 0; i < mc.t.size(); ++i)
    for (std::size_t j = 0; j < mc.x.size(); ++j) {
      ComparePoint p;
      p.t = mc.t[i];
      p.x = mc.x[j];
      p.mc = mc.at(i, j);
      p.se = mc.se[i * mc.x.size() + j];
      p.fd = fd.interpolate(p.t, p.x);
      p.diff = std::abs(p.mc - p.fd);
      const double allowed = 3.0 * (p.se + scheme_tol);
      p.pass = std::isfinite(p.diff) && p.diff <= allowed;
      rep.pass = rep.pass && p.pass;
      rep.max_diff = std::max(rep.max_diff, std::isfinite(p.diff) ? p.diff : std::numeric_limits<double>::infinity());
      const double ratio = std::isfinite(p.diff) ? p.diff / allowed : std::numeric_limits<double>::infinity();
      if (ratio > worst) {
        worst = ratio;
        rep.max_allowed = allowed;
      }
      rep.points.push_back(p);
    }
  return rep;
}

}  // namespace lbds
