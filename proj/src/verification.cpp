#include "lbds/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "lbds/commands.hpp"
#include "lbds/doss_sussmann.hpp"
#include "lbds/error.hpp"
#include "lbds/rng.hpp"

namespace lbds {

using nlohmann::json;

namespace {

std::uint64_t criterion_seed(const VerifyOptions& o, int id) {
  return mix64(o.seed ^ (static_cast<std::uint64_t>(id) << 40));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Accumulates pass/fail conditions and a short human-readable summary.
struct Outcome {
  bool pass = true;
  std::vector<std::string> parts;
  json metrics = json::object();

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    parts.push_back(what + (ok ? "" : " [FAIL]"));
  }
  std::string detail() const {
    std::string s;
    for (std::size_t k = 0; k < parts.size(); ++k) s += (k ? "; " : "") + parts[k];
    return s;
  }
};

struct Stat {
  double mean = 0.0, se = 0.0;
};

template <class F>
Stat sample_stat(std::size_t n, F&& value) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double v = value(p);
    s += v;
    s2 += v * v;
  }
  const double mean = s / double(n);
  const double var = (s2 - double(n) * mean * mean) / double(n - 1);
  return {mean, std::sqrt(std::max(var, 0.0) / double(n))};
}

LevyCharacteristics still(double T = 1.0) { return LevyCharacteristics(T, 0.0, 0.0, {}, Modulation::proportional); }

// 1. Orthonormality of q_n against pi_0 for the two-atom and Poisson presets.
Outcome basis_orthonormality(const VerifyOptions&) {
  Outcome o;
  const double r = 1.0 / std::sqrt(2.0);
  struct Case {
    const char* name;
    LevyCharacteristics chars;
    std::vector<double> alpha;  // closed-form lower triangle, row-major
  };
  std::vector<Case> cases{{"two_atom", models::two_atom(), {r, 0.0, r}}, {"poisson", models::poisson(), {r}}};
  for (const auto& c : cases) {
    const auto basis = build_basis(c.chars);
    const std::size_t d = basis.dimension();
    double gram_err = 0.0, alpha_err = 0.0;
    for (std::size_t n = 0; n < d; ++n)
      for (std::size_t m = 0; m < d; ++m) {
        double g = 0.0;
        for (const auto& a : basis.reference_measure()) g += a.weight * basis.q(n, a.location) * basis.q(m, a.location);
        gram_err = std::max(gram_err, std::abs(g - (n == m ? 1.0 : 0.0)));
      }
    std::size_t idx = 0;
    for (std::size_t n = 0; n < d; ++n)
      for (std::size_t k = 0; k <= n; ++k)
        alpha_err = std::max(alpha_err, std::abs(basis.alpha()(Eigen::Index(n), Eigen::Index(k)) - c.alpha.at(idx++)));
    o.metrics[c.name] = {{"dimension", d}, {"max_gram_error", gram_err}, {"max_alpha_error", alpha_err}};
    o.require(gram_err <= 1e-10 && idx == c.alpha.size(), std::string(c.name) + " |G-I|=" + fmt(gram_err));
    o.require(alpha_err <= 1e-12, std::string(c.name) + " alpha vs closed form " + fmt(alpha_err));
  }
  return o;
}

// 2. Martingale and bracket checks on H_T with 1e5 paths, N = 100.
Outcome martingale_bracket(const VerifyOptions& opt) {
  Outcome o;
  const auto chars = models::mixed();
  const auto basis = build_basis(chars);
  const auto grid = TimeGrid::uniform(0.0, 1.0, 100);
  const std::size_t n = 100000, chunk = 10000, d = basis.dimension();
  std::vector<double> H(n * d, 0.0);
  for (std::size_t start = 0; start < n; start += chunk) {
    BatchOptions bo;
    bo.first_path = start;
    const auto batch = simulate_batch(chars, basis, grid, chunk, criterion_seed(opt, 2), bo);
    for (std::size_t p = 0; p < chunk; ++p)
      for (std::size_t i = 0; i < grid.steps(); ++i) {
        const auto dh = batch.dH(p, i);
        for (std::size_t k = 0; k < d; ++k) H[(start + p) * d + k] += dh[k];
      }
  }
  // time-homogeneous model: r = 1, so the bracket of every H^(k) at T = 1 is 1
  const double bracket = 1.0;
  o.metrics["dimension"] = d;
  int worst_k = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const auto m = sample_stat(n, [&](std::size_t p) { return H[p * d + k]; });
    const auto v = sample_stat(n, [&](std::size_t p) { return H[p * d + k] * H[p * d + k]; });
    o.metrics["mean"].push_back({{"k", k + 1}, {"value", m.mean}, {"se", m.se}});
    o.metrics["variance"].push_back({{"k", k + 1}, {"value", v.mean}, {"se", v.se}, {"bracket", bracket}});
    o.require(std::abs(m.mean) <= 3.0 * m.se, "mean H" + std::to_string(k + 1) + " " + fmt(m.mean / m.se) + " SE");
    o.require(std::abs(v.mean - bracket) <= 3.0 * v.se,
              "var H" + std::to_string(k + 1) + " " + fmt((v.mean - bracket) / v.se) + " SE");
    for (std::size_t k2 = k + 1; k2 < d; ++k2) {
      const auto c = sample_stat(n, [&](std::size_t p) { return H[p * d + k] * H[p * d + k2]; });
      o.metrics["cross"].push_back({{"k", k + 1}, {"k2", k2 + 1}, {"value", c.mean}, {"se", c.se}});
      const double z = std::abs(c.mean) / c.se;
      if (z > worst) {
        worst = z;
        worst_k = int(10 * (k + 1) + k2 + 1);
      }
      o.pass = o.pass && z <= 3.0;
    }
  }
  o.parts.push_back("max cross-covariance " + fmt(worst) + " SE (pair " + std::to_string(worst_k) + ")" +
                    (worst <= 3.0 ? "" : " [FAIL]"));
  return o;
}

// 3. Yosida properties for the cubic-monotone preset: signs, Lipschitz bound, domination, convergence, cross inequality.
Outcome yosida_suite(const VerifyOptions& opt) {
  Outcome o;
  const auto fs = models::cubic_f(), hs = models::cubic_h();
  const ScalarMap f = [&](double y) { return fs(0.0, y, {}); };
  const ScalarMap h = [&](double y) { return hs(0.0, y, {}); };
  const double tol = 1e-9;
  std::size_t bad[6] = {0, 0, 0, 0, 0, 0};
  double max_resid = 0.0;
  const std::size_t samples = 1000;
  for (std::size_t k = 0; k < samples; ++k) {
    CounterRng rng(criterion_seed(opt, 3), k, 0, StreamTag::probe);
    const double y = 6.0 * rng.uniform() - 3.0, yp = 6.0 * rng.uniform() - 3.0;
    const double delta = std::exp(std::log(0.05) + std::log(40.0) * rng.uniform());
    const double r = std::exp(std::log(0.05) + std::log(40.0) * rng.uniform());
    for (const ScalarMap* phi : {&f, &h}) {
      const double J = yosida_resolvent(*phi, y, delta);
      max_resid = std::max(max_resid, std::abs(J - delta * (*phi)(J) - y) / (1.0 + std::abs(y)));
    }
    const double fd = yosida_apply(f, y, delta), fdp = yosida_apply(f, yp, delta), frp = yosida_apply(f, yp, r);
    const double hd = yosida_apply(h, y, delta), hdp = yosida_apply(h, yp, delta), hrp = yosida_apply(h, yp, r);
    const double dy = y - yp;
    if (dy * (fd - fdp) > tol) ++bad[0];
    if (dy * (hd - hdp) > tol) ++bad[1];
    if (std::abs(fd - fdp) + std::abs(hd - hdp) > 2.0 / delta * std::abs(dy) + tol) ++bad[2];
    if (std::abs(fd) > std::abs(f(y)) + tol || std::abs(hd) > std::abs(h(y)) + tol) ++bad[3];
    if (dy * (fd - frp) > (delta + r) * fd * frp + tol || dy * (hd - hrp) > (delta + r) * hd * hrp + tol) ++bad[5];
    // pointwise convergence: |f_delta - f| shrinks with delta and stays below delta |f'(y)| |f(y)|
    for (const auto* spec : {&fs, &hs}) {
      const ScalarMap& phi = spec == &fs ? f : h;
      double prev = std::numeric_limits<double>::infinity();
      for (int m = 0; m <= 10; ++m) {
        const double dm = std::ldexp(1.0, -m);
        const double e = std::abs(yosida_apply(phi, y, dm) - phi(y));
        const double bound = dm * std::abs(spec->dy(0.0, y, {})) * std::abs(phi(y));
        if (e > prev + tol || e > bound + tol) {
          ++bad[4];
          break;
        }
        prev = e;
      }
    }
  }
  const char* names[6] = {"(i)", "(ii)", "(iii)", "(iv) domination", "(iv) convergence", "(v)"};
  for (int k = 0; k < 6; ++k) {
    o.metrics["violations"][names[k]] = bad[k];
    o.require(bad[k] == 0, std::string(names[k]) + " " + std::to_string(bad[k]) + "/" + std::to_string(samples));
  }
  o.metrics["samples"] = samples;
  o.metrics["max_resolvent_residual"] = max_resid;
  o.require(max_resid <= 1e-12, "resolvent residual " + fmt(max_resid));
  return o;
}

// 4. Linear deterministic BDSDE: first-order convergence to e.
Outcome linear_bdsde(const VerifyOptions& opt) {
  Outcome o;
  ProblemSpec spec;
  spec.f = DriverSpec::linear(1.0);
  spec.terminal = FieldSpec::constant(1.0);
  const auto problem = make_problem(spec);
  const auto chars = still();
  std::vector<double> err;
  for (std::size_t N : {200u, 400u}) {
    const auto batch = simulate_batch(chars, MartingaleBasis::empty(chars), TimeGrid::uniform(0.0, 1.0, N), 1,
                                      criterion_seed(opt, 4));
    const auto sol = solve_lipschitz(problem, ForwardState::none(batch), batch);
    err.push_back(std::abs(sol.Y(0, 0) - std::exp(1.0)));
  }
  const double ratio = err[0] / err[1];
  o.metrics = {{"error_N200", err[0]}, {"error_N400", err[1]}, {"ratio", ratio}};
  o.require(err[0] <= 0.01, "|Y0-e| at N=200 " + fmt(err[0]));
  o.require(ratio >= 1.7 && ratio <= 2.3, "halving ratio " + fmt(ratio));
  return o;
}

struct StochasticModel {
  LevyCharacteristics chars = models::two_atom();
  MartingaleBasis basis = build_basis(chars);
  PathBatch batch;
  std::optional<ForwardState> fwd;
  RGBDSDEProblem problem;
  SolverConfig solver;
};

StochasticModel stochastic_model(const ProblemSpec& spec, std::uint64_t seed, std::size_t paths = 10000,
                                 std::size_t steps = 50) {
  StochasticModel m;
  BatchOptions bo;
  bo.backward_groups = 4;
  m.batch = simulate_batch(m.chars, m.basis, TimeGrid::uniform(0.0, 1.0, steps), paths, seed, bo);
  m.fwd = ForwardState::levy(m.batch);
  m.problem = make_problem(spec, 1.0, gamma_floor(m.basis, m.batch.grid().nodes()));
  m.solver.picard_max_iters = 50;
  return m;
}

// 5. Reflection: deterministic decreasing obstacle and the stochastic test model.
Outcome reflection(const VerifyOptions& opt) {
  Outcome o;
  const double s0 = 0.8;
  const auto chars = still();
  const auto batch = simulate_batch(chars, MartingaleBasis::empty(chars), TimeGrid::uniform(0.0, 1.0, 50), 1,
                                    criterion_seed(opt, 5));
  ProblemSpec spec;
  spec.terminal = FieldSpec::constant(0.0);
  spec.obstacle = FieldSpec{{{s0, 0, 0}, {-s0, 1, 0}}};
  const auto sol = solve_reflected(make_problem(spec), ForwardState::none(batch), batch);
  double ey = 0.0, ek = 0.0;
  for (std::size_t i = 0; i <= 50; ++i) {
    const double t = batch.grid().node(i);
    ey = std::max(ey, std::abs(sol.Y(0, i) - s0 * (1.0 - t)));
    ek = std::max(ek, std::abs(sol.K(0, i) - s0 * t));
  }
  o.require(ey <= 1e-12 && ek <= 1e-12, "deterministic |Y-S|=" + fmt(ey) + " |K-s0 t|=" + fmt(ek));

  auto m = stochastic_model(models::z_coupled(), criterion_seed(opt, 5) + 1);
  const auto st = picard_solve(m.problem, *m.fwd, m.batch, m.solver);
  double k2 = 0.0, min_dk = 0.0;
  for (std::size_t p = 0; p < st.paths(); ++p) {
    k2 += st.K(p, st.steps()) * st.K(p, st.steps());
    for (std::size_t i = 0; i < st.steps(); ++i) min_dk = std::min(min_dk, st.K(p, i + 1) - st.K(p, i));
  }
  const double kT = std::sqrt(k2 / double(st.paths()));
  const double dt = m.batch.grid().dt(0);
  const double defect = std::abs(st.diagnostics.skorokhod_trapezoid);
  o.metrics = {{"deterministic_y_error", ey},    {"deterministic_k_error", ek},
               {"skorokhod_trapezoid", defect},  {"skorokhod_node", st.diagnostics.skorokhod_node},
               {"K_T_l2", kT},                   {"dt", dt},
               {"min_dK", min_dk},               {"min_gap", st.diagnostics.min_gap},
               {"picard_converged", st.diagnostics.converged}};
  o.require(kT > 0.0, "reflection active ||K_T||=" + fmt(kT));
  o.require(defect <= dt * kT, "Skorokhod defect " + fmt(defect) + " <= dt ||K_T|| = " + fmt(dt * kT));
  o.require(min_dk >= 0.0, "min dK " + fmt(min_dk));
  o.require(st.diagnostics.min_gap >= -1e-8, "min Y-S " + fmt(st.diagnostics.min_gap));
  return o;
}

// 6. Comparison: xi2 = xi1 + 1 on coupled paths.
Outcome comparison(const VerifyOptions& opt) {
  Outcome o;
  auto m = stochastic_model(models::z_coupled(), criterion_seed(opt, 6));
  auto spec2 = models::z_coupled();
  spec2.terminal.terms.push_back({1.0, 0, 0});
  const auto p2 = make_problem(spec2, 1.0, gamma_floor(m.basis, m.batch.grid().nodes()));
  const auto rep = compare_solutions(m.problem, p2, *m.fwd, m.batch, m.solver);
  o.metrics = {{"violation_fraction", rep.violation_fraction}, {"tolerance", rep.tolerance},
               {"min_gap", rep.min_gap}, {"y0_gap", rep.y0_gap}};
  o.require(rep.violation_fraction == 0.0, "violations " + fmt(100.0 * rep.violation_fraction) + "%");
  o.parts.push_back("min Y2-Y1 " + fmt(rep.min_gap) + ", Y0 gap " + fmt(rep.y0_gap));
  return o;
}

// 7. Picard contraction and uniqueness on the z-coupled model.
Outcome picard_contraction(const VerifyOptions& opt) {
  Outcome o;
  auto m = stochastic_model(models::z_coupled(), criterion_seed(opt, 7));
  auto cfg = m.solver;
  cfg.picard_init = PicardInit::zero;
  const auto a = picard_solve(m.problem, *m.fwd, m.batch, cfg);
  cfg.picard_init = PicardInit::obstacle;
  const auto b = picard_solve(m.problem, *m.fwd, m.batch, cfg);
  const auto& h = a.diagnostics.picard_residuals;
  double worst = 0.0;
  std::vector<double> ratios;
  for (std::size_t n = 1; n < h.size(); ++n) {
    ratios.push_back(h[n] / h[n - 1]);
    if (n >= 2) worst = std::max(worst, ratios.back());
  }
  const WeightProcess w(weight_rate(m.problem.drivers.bounds, cfg.epsilon), *m.fwd, m.batch.grid(), cfg.theta, cfg.mu);
  const double dist = weighted_distance(a, b, w, *m.fwd, m.batch);
  o.metrics = {{"residuals_zero_init", h}, {"residuals_obstacle_init", b.diagnostics.picard_residuals},
               {"ratios", ratios}, {"max_ratio_from_3", worst}, {"init_distance", dist}, {"tol", cfg.picard_tol}};
  o.require(a.diagnostics.converged && b.diagnostics.converged,
            "converged in " + std::to_string(h.size()) + "/" + std::to_string(b.diagnostics.picard_residuals.size()));
  o.require(h.size() >= 3 && worst <= 0.9, "max ratio from iteration 3 " + fmt(worst));
  o.require(dist <= 5.0 * cfg.picard_tol, "initialisation gap " + fmt(dist));
  return o;
}

// 8. Yosida family: uniform norms and Cauchy distances across delta.
Outcome yosida_family(const VerifyOptions& opt) {
  Outcome o;
  auto m = stochastic_model(models::cubic(), criterion_seed(opt, 8));
  const WeightProcess w(weight_rate(m.problem.drivers.bounds, m.solver.epsilon), *m.fwd, m.batch.grid(),
                        m.solver.theta, m.solver.mu);
  std::vector<SolutionGrid> sols;
  std::vector<double> totals, dists;
  for (double delta : {1.0, 0.5, 0.25, 0.125}) {
    sols.push_back(solve_yosida(m.problem, delta, *m.fwd, m.batch, m.solver));
    const auto nr = weighted_norms(sols.back(), w, *m.fwd, m.batch);
    totals.push_back(nr.total());
    o.metrics["norms"].push_back({{"delta", delta}, {"S2", nr.S2}, {"H2Q", nr.H2Q}, {"H2l2", nr.H2l2}, {"K2", nr.K2}});
  }
  for (std::size_t k = 1; k < sols.size(); ++k) dists.push_back(weighted_distance(sols[k - 1], sols[k], w, *m.fwd, m.batch));
  const double hi = *std::max_element(totals.begin(), totals.end());
  const double lo = *std::min_element(totals.begin(), totals.end());
  bool decreasing = true;
  for (std::size_t k = 1; k < dists.size(); ++k) decreasing = decreasing && dists[k] < dists[k - 1];
  o.metrics["totals"] = totals;
  o.metrics["distances"] = dists;
  o.require(std::isfinite(hi) && hi <= 2.0 * lo, "norm spread " + fmt(hi / lo));
  o.require(decreasing, "distances " + fmt(dists[0]) + " > " + fmt(dists[1]) + " > " + fmt(dists[2]));
  return o;
}

// 9. Reflected SDE: invariance, complementarity, drift clamp.
Outcome reflected_sde(const VerifyOptions& opt) {
  Outcome o;
  const LevyCharacteristics chars(1.0, -3.0, 0.3, {JumpAtom{1.0, 2.0}}, Modulation::proportional);
  const auto basis = build_basis(chars);
  const auto batch = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, 50), 2000, criterion_seed(opt, 9));
  const auto iv = SmoothDomain::interval(-1.0, 1.0);
  const SigmaField sigma = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * (1.0 - x[0]); };
  validate_jump_invariance(iv, chars, sigma);
  const auto refl = solve_paths(iv, chars, sigma, {0, {0.3}}, batch);
  const auto rep = complementarity(iv, refl);
  o.require(rep.min_psi >= -1e-12, "min Psi " + fmt(rep.min_psi));
  o.require(rep.off_boundary_kappa == 0.0 && rep.active_intervals > 0,
            "kappa off boundary " + fmt(rep.off_boundary_kappa) + " over " + std::to_string(rep.active_intervals) +
                " active intervals");

  const double b = -1.0, s0 = 0.5, x0 = 0.2;
  const LevyCharacteristics drift(1.0, b, 0.0, {}, Modulation::proportional);
  const auto db = simulate_batch(drift, MartingaleBasis::empty(drift), TimeGrid::uniform(0.0, 1.0, 40), 2,
                                 criterion_seed(opt, 9) + 1);
  const auto unit = SmoothDomain::interval(0.0, 1.0);
  const auto clamp = solve_paths(unit, drift, constant_sigma({s0}), {0, {x0}}, db);
  double ex = 0.0, ek = 0.0;
  for (std::size_t node = 0; node <= 40; ++node) {
    const double t = db.grid().node(node);
    ex = std::max(ex, std::abs(clamp.X(0, node)[0] - std::max(x0 + s0 * b * t, 0.0)));
    ek = std::max(ek, std::abs(clamp.kappa(0, node) - std::max(s0 * std::abs(b) * t - x0, 0.0)));
  }
  o.require(ex <= 1e-12 && ek <= 1e-12, "drift clamp |X|=" + fmt(ex) + " |kappa|=" + fmt(ek));
  o.metrics = {{"min_psi", rep.min_psi}, {"boundary_tol", rep.boundary_tol}, {"off_boundary_kappa", rep.off_boundary_kappa},
               {"active_intervals", rep.active_intervals}, {"clamp_x_error", ex}, {"clamp_kappa_error", ek}};
  return o;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  return v;
}

// 10. Doss-Sussmann flow: closed forms, inverse, route agreement.
Outcome doss_sussmann(const VerifyOptions& opt) {
  Outcome o;
  const auto grid = TimeGrid::uniform(0.0, 1.0, 50);
  const auto pois = models::poisson();
  double closed = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto batch = simulate_batch(pois, build_basis(pois), grid, 1, criterion_seed(opt, 10) + s);
    std::vector<double> dB(50), tail(51, 0.0);
    for (std::size_t i = 0; i < 50; ++i) dB[i] = batch.dB(0, i);
    for (std::size_t i = 50; i-- > 0;) tail[i] = tail[i + 1] + dB[i];
    const FlowDriver cg{[](double, double, double) { return 0.7; }, [](double, double, double) { return 0.0; }, true};
    const FlowDriver lg{[](double, double, double y) { return y; }, [](double, double, double) { return 1.0; }, true};
    const auto c = flow_chi(cg, grid, dB, 0.0, 1.3);
    const auto l = flow_chi(lg, grid, dB, 0.0, 1.3);
    for (std::size_t i = 0; i <= 50; ++i) {
      closed = std::max(closed, std::abs(c[i].chi - (1.3 + 0.7 * tail[i])));
      closed = std::max(closed, std::abs(l[i].chi - 1.3 * std::exp(tail[i])));
      closed = std::max(closed, std::abs(l[i].dchi - std::exp(tail[i])));
    }
  }
  o.require(closed <= 1e-10, "closed forms " + fmt(closed));

  const auto batch = simulate_batch(pois, build_basis(pois), grid, 1, criterion_seed(opt, 10) + 7);
  std::vector<double> dB(50);
  for (std::size_t i = 0; i < 50; ++i) dB[i] = batch.dB(0, i);
  const FlowDriver g{[](double, double x, double y) { return 0.3 * std::sin(y) + 0.1 * x; }, {}, false};
  const FlowField field(g, grid, dB, linspace(-1.0, 1.0, 9), linspace(-4.0, 4.0, 81));
  const auto chk = check_flow(field, 10);
  o.require(chk.roundtrip <= 1e-8, "round trip " + fmt(chk.roundtrip));

  const LevyCharacteristics chars(1.0, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{-0.5, 1.0}}, Modulation::proportional);
  const auto basis = build_basis(chars);
  BatchOptions bo;
  bo.backward_groups = 2;
  const auto rb = simulate_batch(chars, basis, TimeGrid::uniform(0.0, 1.0, 80), 8000, criterion_seed(opt, 10) + 11, bo);
  const auto fwd = ForwardState::levy(rb);
  RGBDSDEProblem direct;
  direct.terminal = [](const DriverContext& c) { return std::cos(c.x[0]); };
  direct.drivers = zero_drivers();
  direct.drivers.f = [](const DriverContext& c, double, std::span<const double>) { return 0.5 * std::sin(c.x[0]); };
  const FlowDriver rg{[](double, double, double y) { return 0.3 * y + 0.1 * std::sin(y); },
                      [](double, double, double y) { return 0.3 + 0.1 * std::cos(y); }, true};
  direct.drivers.g = [rg](const DriverContext& c, double y, std::span<const double>) { return rg.value(c.t, 0.0, y); };
  direct.drivers.g_vanishes = false;
  direct.drivers.g_uses_yz = true;
  const auto ys = solve_lipschitz(direct, fwd, rb);
  const auto flows = tabulate_flows(rg, rb, {0.0}, linspace(-6.0, 6.0, 241));
  RGBDSDEProblem tr = direct;
  tr.drivers = transformed_drivers(direct.drivers, rg, flows, rb, basis);
  tr.drivers.bounds.lipschitz_y = 2.0;
  const auto back = flow_restore(solve_lipschitz(tr, fwd, rb), flows, rb);
  const double se = std::hypot(ys.Y0_se(), back.Y0_se());
  const double scheme_tol = rb.grid().dt(0);
  double worst = 0.0, allowed = 3.0 * (se + scheme_tol);
  for (std::size_t grp = 0; grp < 2; ++grp) {
    double a = 0.0, b = 0.0;
    std::size_t cnt = 0;
    for (std::size_t p = grp; p < rb.paths(); p += 2) {
      a += ys.Y(p, 0);
      b += back.Y(p, 0);
      ++cnt;
    }
    worst = std::max(worst, std::abs(a - b) / double(cnt));
  }
  o.require(worst <= allowed, "route gap " + fmt(worst) + " <= " + fmt(allowed));
  o.metrics = {{"closed_form_error", closed}, {"roundtrip", chk.roundtrip}, {"fd_mismatch", chk.fd_mismatch},
               {"route_gap", worst}, {"route_allowed", allowed}, {"route_se", se}, {"scheme_tol", scheme_tol}};
  return o;
}

// 11. SIPDE: Monte Carlo representation against the finite-difference oracle.
Outcome sipde_oracle(const VerifyOptions& opt) {
  Outcome o;
  const auto problem = models::sipde(true);
  validate_sipde(problem);
  MonteCarloConfig mc;
  mc.paths = 20000;
  mc.steps = 100;
  mc.seed = criterion_seed(opt, 11);
  const auto start = std::chrono::steady_clock::now();
  const auto u = mc_representation(problem, {0.0, 0.25, 0.5}, {0.1, 0.5, 0.9}, mc);
  const double mc_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  FDConfig fc;
  fc.space_cells = 800;
  fc.time_steps = 800;
  const auto fd = fd_obstacle_solve(problem, fc);
  const auto rep = compare_report(u, fd, 0.03);
  std::size_t failures = 0, binding = 0;
  for (const auto& f : u.failures) failures += f.empty() ? 0 : 1;
  json pts = json::array();
  for (const auto& p : rep.points) {
    if (std::abs(p.fd - problem.obstacle(p.t, p.x)) <= 1e-9) ++binding;
    pts.push_back({{"t", p.t}, {"x", p.x}, {"mc", number(p.mc)}, {"fd", p.fd}, {"se", number(p.se)}});
  }
  o.metrics = {{"max_diff", number(rep.max_diff)}, {"max_allowed", rep.max_allowed}, {"points", pts},
               {"binding_points", binding}, {"mc_failures", failures}};
  o.require(failures == 0, std::to_string(failures) + " MC failures");
  o.require(rep.pass, "max |MC-FD| " + fmt(rep.max_diff) + " <= " + fmt(rep.max_allowed));
  o.require(mc_seconds <= 600.0, "MC runtime within 10 min");
  o.parts.push_back(std::to_string(binding) + "/9 points on the obstacle");
  return o;
}

const char* kSmallConfig = R"({
  "seed": 11,
  "characteristics": {"T": 1.0, "atoms": [{"e": 1.0, "lambda": 1.0}]},
  "grid": {"N": 20},
  "batch": {"paths": 500},
  "problem": {
    "f": {"preset": "linear", "a": -0.5, "x": 1.0},
    "h": {"preset": "linear", "a": -0.5, "c": 0.3},
    "terminal": {"terms": [[1.0, 0, 2]]},
    "obstacle": {"terms": [[0.5, 0, 0], [-0.5, 1, 0], [-0.5, 0, 1], [0.5, 1, 1]]},
    "state": "reflected", "x0": [0.5], "sigma": {"c": 0.5, "slope": -0.5}
  },
  "domain": {"kind": "interval", "a": 0.0, "b": 1.0},
  "pde": {"paths": 500, "steps": 20, "fd_cells": 100, "fd_steps": 100},
  "outputs": {"max_csv_paths": 20}
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 12. Byte-identical artifacts for repeated runs with the same configuration and seed.
Outcome reproducibility(const VerifyOptions& opt) {
  Outcome o;
  const ExperimentConfig fallback = opt.config ? ExperimentConfig{} : parse_config(kSmallConfig);
  const ExperimentConfig& cfg = opt.config ? *opt.config : fallback;
  std::filesystem::remove_all(opt.scratch);
  std::size_t files = 0, differing = 0;
  std::ostringstream sink;
  for (const std::string cmd : {"basis", "simulate", "reflect", "solve", "pde"}) {
    for (const char* run : {"a", "b"}) {
      CommandOptions co;
      co.out_dir = opt.scratch / run / cmd;
      run_command(cmd, cfg, co, sink);
    }
    for (const auto& entry : std::filesystem::directory_iterator(opt.scratch / "a" / cmd)) {
      const auto other = opt.scratch / "b" / cmd / entry.path().filename();
      ++files;
      if (!std::filesystem::exists(other) || slurp(entry.path()) != slurp(other)) {
        ++differing;
        o.metrics["differing"].push_back(cmd + "/" + entry.path().filename().string());
      }
    }
  }
  std::filesystem::remove_all(opt.scratch);
  o.metrics["files"] = files;
  o.metrics["config_hash"] = hex64(cfg.hash);
  o.require(files > 0 && differing == 0,
            std::to_string(files - differing) + "/" + std::to_string(files) + " artifacts identical");
  return o;
}

struct Entry {
  const char* name;
  Outcome (*fn)(const VerifyOptions&);
};

const Entry kEntries[kCriteria] = {
    {"basis orthonormality", basis_orthonormality},
    {"martingale and bracket", martingale_bracket},
    {"Yosida suite", yosida_suite},
    {"linear BDSDE", linear_bdsde},
    {"reflection", reflection},
    {"comparison", comparison},
    {"Picard contraction", picard_contraction},
    {"Yosida family", yosida_family},
    {"reflected SDE", reflected_sde},
    {"Doss-Sussmann", doss_sussmann},
    {"SIPDE oracle", sipde_oracle},
    {"reproducibility", reproducibility},
};

}  // namespace

CriterionResult verify_criterion(int id, const VerifyOptions& options) {
  if (id < 1 || id > kCriteria) throw InvalidArgument("no criterion " + std::to_string(id));
  CriterionResult r;
  r.id = id;
  r.name = kEntries[id - 1].name;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto o = kEntries[id - 1].fn(options);
    r.pass = o.pass;
    r.detail = o.detail();
    r.metrics = o.metrics;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string format_row(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%-4s %2d  %-24s", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
  char tail[32];
  std::snprintf(tail, sizeof tail, "  (%.1fs)", r.seconds);
  return std::string(head) + r.detail + tail;
}

std::vector<CriterionResult> run_verification(const VerifyOptions& options, std::ostream* progress) {
  std::vector<int> ids = options.criteria;
  if (ids.empty())
    for (int k = 1; k <= kCriteria; ++k) ids.push_back(k);
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(verify_criterion(id, options));
    if (progress) *progress << format_row(out.back()) << '\n' << std::flush;
  }
  return out;
}

}  // namespace lbds
