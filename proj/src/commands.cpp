#include "lbds/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lbds/artifacts.hpp"
#include "lbds/error.hpp"
#include "lbds/sipde.hpp"
#include "lbds/verification.hpp"

namespace lbds {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string> indexed(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= n; ++k) out.push_back(stem + std::to_string(k));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

PathBatch obtain_batch(const ExperimentConfig& cfg, const CommandOptions& opt, const MartingaleBasis& basis) {
  if (opt.batch_cache) {
    std::ifstream in(*opt.batch_cache, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open batch cache " + opt.batch_cache->string());
    auto batch = PathBatch::read_cache(in);
    const auto grid = cfg.grid();
    if (batch.steps() != grid.steps() || batch.dim() != basis.dimension() ||
        std::abs(batch.grid().start() - grid.start()) > 1e-12 || std::abs(batch.grid().end() - grid.end()) > 1e-12)
      throw InvalidArgument("batch cache does not match the configured grid and basis");
    return batch;
  }
  BatchOptions bo;
  bo.backward_groups = cfg.backward_groups;
  return simulate_batch(cfg.characteristics(), basis, cfg.grid(), cfg.paths, cfg.seed, bo);
}

SigmaField sigma_field(const ExperimentConfig& cfg, std::size_t dim) {
  if (dim == 1) {
    const AffineSigma s = cfg.sigma;
    return [s](std::span<const double> x, std::span<double> out) { out[0] = s(x[0]); };
  }
  return constant_sigma(std::vector<double>(dim, cfg.sigma.c));
}

ReflectedBatch reflect_paths(const ExperimentConfig& cfg, const PathBatch& batch, const SmoothDomain& domain) {
  const auto sigma = sigma_field(cfg, domain.dim());
  validate_jump_invariance(domain, cfg.characteristics(), sigma);
  if (!domain.contains(cfg.x0)) throw InvalidArgument("x0 lies outside the domain");
  return solve_paths(domain, cfg.characteristics(), sigma, {0, cfg.x0}, batch);
}

std::size_t csv_paths(const ExperimentConfig& cfg, std::size_t paths) {
  return std::min(paths, cfg.outputs.max_csv_paths);
}

CommandResult run_basis(const ExperimentConfig& cfg, ArtifactSet& out) {
  const auto& chars = cfg.characteristics();
  const auto basis = build_basis(chars);
  const std::size_t d = basis.dimension();
  const auto ref = basis.reference_measure();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t n = 0; n < d; ++n)
    for (std::size_t m = 0; m < d; ++m)
      for (const auto& a : ref) gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) += a.weight * basis.q(n, a.location) * basis.q(m, a.location);
  const double gram_err = d ? (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() : 0.0;
  if (out.csv()) {
    auto alpha = out.csv_file("alpha.csv", {"n", "k", "alpha"});
    for (std::size_t n = 0; n < d; ++n)
      for (std::size_t k = 0; k <= n; ++k)
        alpha.row({double(n + 1), double(k), basis.alpha()(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k))});
    const auto poly = basis.polynomials();
    auto pc = out.csv_file("polynomials.csv", {"n", "power", "q_coef", "p_coef"});
    for (std::size_t n = 0; n < d; ++n)
      for (std::size_t k = 0; k <= d; ++k) {
        const double q = k < poly.q[n].size() ? poly.q[n][k] : 0.0;
        const double p = k < poly.p[n].size() ? poly.p[n][k] : 0.0;
        pc.row({double(n + 1), double(k), q, p});
      }
    auto gc = out.csv_file("gram.csv", {"n", "m", "value"});
    for (std::size_t n = 0; n < d; ++n)
      for (std::size_t m = 0; m < d; ++m) gc.row({double(n + 1), double(m + 1), gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m))});
    auto rc = out.csv_file("reference.csv", {"location", "weight"});
    for (const auto& a : ref) rc.row({a.location, a.weight});
    auto gm = out.csv_file("gamma.csv", concat({"t"}, indexed("gamma_", d)));
    const auto grid = cfg.grid();
    for (double t : grid.nodes()) {
      std::vector<double> row{t};
      for (std::size_t k = 0; k < d; ++k) row.push_back(basis.gamma(k, t));
      gm.row(row);
    }
  }
  const auto& rep = chars.report();
  json s = {{"dimension", d},
            {"max_gram_error", gram_err},
            {"warnings", basis.warnings()},
            {"nl1_integral", number(rep.nl1_integral)},
            {"nl2_u_max", number(rep.nl2_u_max)},
            {"nl2_bound", number(rep.nl2_bound)},
            {"proportional", rep.proportional_detected},
            {"reference_time", rep.reference_time}};
  if (out.json()) out.write_json("basis.json", s);
  return {true, s, {}};
}

json terminal_h_stats(const PathBatch& batch) {
  const std::size_t n = batch.paths(), d = batch.dim(), N = batch.steps();
  json stats = json::array();
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0.0, s2 = 0.0, bracket = 0.0;
    for (std::size_t i = 0; i < N; ++i) bracket += batch.integrals().bracket_at(i, k);
    for (std::size_t p = 0; p < n; ++p) {
      double h = 0.0;
      for (std::size_t i = 0; i < N; ++i) h += batch.dH(p, i)[k];
      s += h;
      s2 += h * h;
    }
    const double mean = s / double(n);
    const double var = n > 1 ? (s2 - double(n) * mean * mean) / double(n - 1) : 0.0;
    stats.push_back({{"k", k + 1}, {"mean", mean}, {"se", std::sqrt(var / double(n))}, {"variance", var}, {"bracket", bracket}});
  }
  return stats;
}

CommandResult run_simulate(const ExperimentConfig& cfg, const CommandOptions& opt, ArtifactSet& out) {
  const auto basis = build_basis(cfg.characteristics());
  const auto batch = obtain_batch(cfg, opt, basis);
  {
    std::ofstream cache(out.add("paths.lbds"), std::ios::binary);
    batch.write_cache(cache);
    if (!cache) throw InvalidArgument("cannot write the batch cache");
  }
  const std::size_t d = batch.dim(), N = batch.steps();
  if (out.csv()) {
    auto nodes = out.csv_file("nodes.csv", {"path", "node", "t", "L", "B"});
    auto incs = out.csv_file("increments.csv", concat({"path", "interval", "t", "dW", "dB", "dL_c", "jumps"}, indexed("dH_", d)));
    for (std::size_t p = 0; p < csv_paths(cfg, batch.paths()); ++p) {
      double B = 0.0;
      for (std::size_t node = 0; node <= N; ++node) {
        nodes.row({double(p), double(node), batch.grid().node(node), batch.L(p, node), B});
        if (node == N) break;
        B += batch.dB(p, node);
        std::vector<double> row{double(p), double(node), batch.grid().node(node), batch.dW(p, node),
                                batch.dB(p, node), batch.dL_continuous(p, node), double(batch.jumps(p, node).size())};
        for (double h : batch.dH(p, node)) row.push_back(h);
        incs.row(row);
      }
    }
  }
  json s = {{"paths", batch.paths()}, {"steps", N}, {"dimension", d}, {"total_jumps", batch.total_jumps()},
            {"terminal_H", terminal_h_stats(batch)}};
  if (out.json()) out.write_json("simulate.json", s);
  return {true, s, {}};
}

CommandResult run_reflect(const ExperimentConfig& cfg, const CommandOptions& opt, ArtifactSet& out) {
  const auto basis = build_basis(cfg.characteristics());
  const auto batch = obtain_batch(cfg, opt, basis);
  const auto domain = make_domain(cfg.domain);
  const auto refl = reflect_paths(cfg, batch, domain);
  const std::size_t l = refl.dim(), N = refl.steps();
  if (out.csv()) {
    auto xs = out.csv_file("reflected.csv", concat(concat({"path", "node", "t"}, indexed("X_", l)), {"kappa"}));
    for (std::size_t p = 0; p < csv_paths(cfg, refl.paths()); ++p)
      for (std::size_t node = 0; node <= N; ++node) {
        std::vector<double> row{double(p), double(node), batch.grid().node(node)};
        for (double v : refl.X(p, node)) row.push_back(v);
        row.push_back(refl.kappa(p, node));
        xs.row(row);
      }
  }
  const auto rep = complementarity(domain, refl);
  const auto mom = reflected_moments(refl, 4.0, 1.0);
  json s = {{"boundary_tol", rep.boundary_tol},
            {"min_psi", rep.min_psi},
            {"off_boundary_kappa", rep.off_boundary_kappa},
            {"active_intervals", rep.active_intervals},
            {"mean_sup_abs_x_pow4", number(mom.sup_abs_pow_mean)},
            {"mean_exp_kappa_T", number(mom.exp_kappa_mean)},
            {"mean_kappa_T", mom.kappa_T_mean}};
  if (out.json()) out.write_json("complementarity.json", s);
  const bool ok = rep.min_psi >= -1e-12 && rep.off_boundary_kappa == 0.0;
  return {ok, s, ok ? json() : json{{"error", "complementarity violated"}, {"report", s}}};
}

CommandResult run_solve(const ExperimentConfig& cfg, const CommandOptions& opt, ArtifactSet& out) {
  const auto& chars = cfg.characteristics();
  const auto basis = build_basis(chars);
  const auto batch = obtain_batch(cfg, opt, basis);
  std::optional<ForwardState> fwd;
  switch (cfg.state) {
    case StateKind::none: fwd = ForwardState::none(batch); break;
    case StateKind::levy: fwd = ForwardState::levy(batch); break;
    case StateKind::reflected: fwd = ForwardState::reflected(reflect_paths(cfg, batch, make_domain(cfg.domain))); break;
  }
  double x_bound = 0.0;
  for (std::size_t p = 0; p < fwd->paths(); ++p)
    for (std::size_t node = 0; node <= fwd->steps(); ++node)
      for (double v : fwd->X(p, node)) x_bound = std::max(x_bound, std::abs(v));
  const auto problem = make_problem(cfg.problem, std::max(x_bound, 1.0), gamma_floor(basis, batch.grid().nodes()));
  const auto solver = cfg.solver();
  const SolutionGrid sol = cfg.numerics.method == SolveMethod::yosida
                               ? solve_yosida(problem, cfg.numerics.deltas.back(), *fwd, batch, solver)
                               : picard_solve(problem, *fwd, batch, solver);
  const std::size_t N = sol.steps(), d = sol.dim();
  if (out.csv()) {
    auto yc = out.csv_file("Y.csv", {"path", "node", "t", "Y", "K"});
    auto zc = out.csv_file("Z.csv", concat({"path", "interval", "t"}, indexed("Z_", d)));
    for (std::size_t p = 0; p < csv_paths(cfg, sol.paths()); ++p)
      for (std::size_t node = 0; node <= N; ++node) {
        yc.row({double(p), double(node), batch.grid().node(node), sol.Y(p, node), sol.K(p, node)});
        if (node == N) continue;
        std::vector<double> row{double(p), double(node), batch.grid().node(node)};
        for (double z : sol.Z(p, node)) row.push_back(z);
        zc.row(row);
      }
    auto pc = out.csv_file("picard.csv", {"iteration", "residual"});
    const auto& h = sol.diagnostics.picard_residuals;
    for (std::size_t k = 0; k < h.size(); ++k) pc.row({double(k + 1), h[k]});
  }
  const WeightProcess w(weight_rate(problem.drivers.bounds, cfg.numerics.epsilon), *fwd, batch.grid(),
                        cfg.numerics.theta, cfg.numerics.mu);
  const auto norms = weighted_norms(sol, w, *fwd, batch);
  json apriori;
  try {
    const auto a = apriori_check(problem, sol, w, *fwd, batch);
    apriori = {{"lhs", number(a.lhs)}, {"rhs_data", number(a.rhs_data)}, {"ratio", number(a.ratio)},
               {"trivial", a.trivial}, {"finite", a.finite}};
  } catch (const InvalidArgument& e) {
    apriori = {{"skipped", e.what()}};
  }
  const auto resid = backward_residuals(problem, sol, *fwd, batch);
  double worst_z = 0.0;
  for (std::size_t i = 0; i < resid.mean.size(); ++i)
    if (resid.se[i] > 0.0) worst_z = std::max(worst_z, std::abs(resid.mean[i]) / resid.se[i]);
  const auto& dg = sol.diagnostics;
  json s = {{"Y0_mean", sol.Y0_mean()},
            {"Y0_se", sol.Y0_se()},
            {"method", cfg.numerics.method == SolveMethod::yosida ? "yosida" : "picard"},
            {"picard_iterations", dg.iterations},
            {"picard_converged", dg.converged},
            {"picard_residuals", dg.picard_residuals},
            {"skorokhod_node", dg.skorokhod_node},
            {"skorokhod_trapezoid", dg.skorokhod_trapezoid},
            {"min_push", dg.min_push},
            {"min_gap", number(dg.min_gap)},
            {"weight_rate", w.a2()},
            {"norms", {{"S2", number(norms.S2)}, {"H2Q", number(norms.H2Q)}, {"H2l2", number(norms.H2l2)}, {"K2", number(norms.K2)}}},
            {"apriori", apriori},
            {"max_residual_z_score", worst_z}};
  if (out.json()) out.write_json("solve.json", s);
  if (!dg.converged)
    return {false, s, {{"error", "Picard iteration did not reach the tolerance"}, {"tolerance", cfg.numerics.picard_tol},
                       {"residuals", dg.picard_residuals}}};
  return {true, s, {}};
}

CommandResult run_pde(const ExperimentConfig& cfg, ArtifactSet& out) {
  const auto problem = make_sipde(cfg.characteristics(), make_domain(cfg.domain), cfg.sigma, cfg.problem);
  const auto check = validate_sipde(problem);
  MonteCarloConfig mc;
  mc.paths = cfg.pde.paths;
  mc.steps = cfg.pde.steps;
  mc.seed = cfg.seed;
  mc.backward_groups = std::max<std::size_t>(cfg.backward_groups, 1);
  mc.solver = cfg.solver();
  const auto u = mc_representation(problem, cfg.pde.t, cfg.pde.x, mc);
  FDConfig fc;
  fc.space_cells = cfg.pde.fd_cells;
  fc.time_steps = cfg.pde.fd_steps;
  const auto fd = fd_obstacle_solve(problem, fc);
  const auto rep = compare_report(u, fd, cfg.pde.scheme_tol);
  if (out.csv()) {
    auto uc = out.csv_file("u.csv", {"t", "x", "u", "se"});
    for (std::size_t i = 0; i < u.t.size(); ++i)
      for (std::size_t j = 0; j < u.x.size(); ++j) uc.row({u.t[i], u.x[j], u.at(i, j), u.se[i * u.x.size() + j]});
  }
  json pts = json::array();
  for (const auto& p : rep.points)
    pts.push_back({{"t", p.t}, {"x", p.x}, {"mc", number(p.mc)}, {"fd", p.fd}, {"diff", number(p.diff)},
                   {"se", number(p.se)}, {"pass", p.pass}});
  std::vector<std::string> failures;
  for (const auto& f : u.failures)
    if (!f.empty()) failures.push_back(f);
  json s = {{"scheme_tol", rep.scheme_tol},
            {"max_diff", number(rep.max_diff)},
            {"max_allowed", rep.max_allowed},
            {"pass", rep.pass},
            {"points", pts},
            {"failures", failures},
            {"max_terminal_gap", check.max_terminal_gap},
            {"max_growth_ratio", check.max_growth_ratio},
            {"paths", u.paths},
            {"fd_cells", fc.space_cells},
            {"fd_steps", fc.time_steps}};
  if (out.json()) out.write_json("compare.json", s);
  if (!failures.empty()) return {false, s, {{"error", "Monte Carlo points failed"}, {"failures", failures}}};
  if (!rep.pass) return {false, s, {{"error", "Monte Carlo and finite differences disagree"}, {"report", s}}};
  return {true, s, {}};
}

CommandResult run_verify(const ExperimentConfig& cfg, const CommandOptions& opt, ArtifactSet& out,
                         std::ostream& log) {
  VerifyOptions vo;
  vo.seed = cfg.seed;
  vo.config = &cfg;
  vo.criteria = opt.criteria;
  vo.scratch = opt.out_dir / "reproducibility";
  const auto results = run_verification(vo, &log);
  json rows = json::array();
  bool all = true;
  for (const auto& r : results) {
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"metrics", r.metrics}});
    all = all && r.pass;
  }
  if (out.csv()) {
    auto c = out.csv_file("verify.csv", {"criterion", "pass"});
    for (const auto& r : results) c.row({double(r.id), r.pass ? 1.0 : 0.0});
  }
  json s = {{"all_pass", all}, {"criteria", rows}};
  if (out.json()) out.write_json("verify.json", s);
  json failed = json::array();
  for (const auto& r : results)
    if (!r.pass) failed.push_back({{"id", r.id}, {"name", r.name}, {"detail", r.detail}});
  return {all, s, all ? json() : json{{"error", "verification failed"}, {"failed", failed}}};
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"basis", "simulate", "reflect", "solve", "pde", "verify"};
  return names;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opt,
                          std::ostream& log) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw InvalidArgument("unknown subcommand '" + name + "'");
  ArtifactSet out(opt.out_dir, cfg, name);
  CommandResult r;
  if (name == "basis") r = run_basis(cfg, out);
  else if (name == "simulate") r = run_simulate(cfg, opt, out);
  else if (name == "reflect") r = run_reflect(cfg, opt, out);
  else if (name == "solve") r = run_solve(cfg, opt, out);
  else if (name == "pde") r = run_pde(cfg, out);
  else r = run_verify(cfg, opt, out, log);
  out.finish(r.summary);
  return r;
}

}  // namespace lbds
