#include "lbds/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lbds/error.hpp"

namespace lbds {

std::vector<std::vector<int>> monomial_exponents(std::size_t vars, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(vars, 0);
  for (int total = 0; total <= degree; ++total) {
    // All compositions of `total` into `vars` parts, in lexicographic order.
    auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
      if (pos + 1 >= vars) {
        if (vars == 0) {
          if (left == 0) out.push_back(e);
          return;
        }
        e[pos] = left;
        out.push_back(e);
        return;
      }
      for (int k = left; k >= 0; --k) {
        e[pos] = k;
        self(self, pos + 1, left - k);
      }
      e[pos] = 0;
    };
    rec(rec, 0, total);
  }
  return out;
}

namespace {

struct GroupFit {
  std::vector<std::size_t> members;
  std::vector<std::size_t> active;
  std::vector<double> mean, scale;
  std::vector<std::vector<int>> exps;
};

GroupFit prepare(const Eigen::MatrixXd& state, std::vector<std::size_t> members, int degree) {
  GroupFit g;
  g.members = std::move(members);
  const auto l = static_cast<std::size_t>(state.cols());
  const double n = static_cast<double>(g.members.size());
  for (std::size_t c = 0; c < l; ++c) {
    double mean = 0.0;
    for (auto p : g.members) mean += state(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c));
    mean /= n;
    double var = 0.0;
    for (auto p : g.members) {
      const double d = state(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    if (sd > 1e-12 * (1.0 + std::abs(mean))) {
      g.active.push_back(c);
      g.mean.push_back(mean);
      g.scale.push_back(1.0 / sd);
    }
  }
  g.exps = monomial_exponents(g.active.size(), degree);
  if (g.members.size() < g.exps.size()) {
    std::ostringstream msg;
    msg << "regression rank deficiency: group with " << g.members.size() << " paths for "
        << g.exps.size() << " features";
    throw NumericalError(msg.str());
  }
  return g;
}

void features(const GroupFit& g, const Eigen::MatrixXd& state, std::size_t p, Eigen::VectorXd& phi) {
  const std::size_t k = g.active.size();
  double z[16];
  std::vector<double> zbig;
  double* zp = z;
  if (k > 16) {
    zbig.resize(k);
    zp = zbig.data();
  }
  for (std::size_t c = 0; c < k; ++c)
    zp[c] = (state(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(g.active[c])) - g.mean[c]) *
            g.scale[c];
  for (std::size_t f = 0; f < g.exps.size(); ++f) {
    double v = 1.0;
    for (std::size_t c = 0; c < k; ++c)
      for (int e = 0; e < g.exps[f][c]; ++e) v *= zp[c];
    phi[static_cast<Eigen::Index>(f)] = v;
  }
}

struct Normal {
  Eigen::MatrixXd A;
  Eigen::MatrixXd r;
};

Normal accumulate_block(const GroupFit& g, const Eigen::MatrixXd& state,
                        const Eigen::MatrixXd& targets, std::size_t lo, std::size_t hi) {
  const auto F = static_cast<Eigen::Index>(g.exps.size());
  Normal nb{Eigen::MatrixXd::Zero(F, F), Eigen::MatrixXd::Zero(F, targets.cols())};
  Eigen::VectorXd phi(F);
  for (std::size_t k = lo; k < hi; ++k) {
    const std::size_t p = g.members[k];
    features(g, state, p, phi);
    nb.A.selfadjointView<Eigen::Lower>().rankUpdate(phi);
    nb.r.noalias() += phi * targets.row(static_cast<Eigen::Index>(p));
  }
  return nb;
}

void solve_and_fill(const GroupFit& g, const Eigen::MatrixXd& state, Normal total,
                    double threshold, Eigen::MatrixXd& fitted) {
  const auto F = static_cast<Eigen::Index>(g.exps.size());
  Eigen::MatrixXd A = total.A.selfadjointView<Eigen::Lower>();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(threshold);
  const Eigen::MatrixXd coef = cod.solve(total.r);
  Eigen::VectorXd phi(F);
  for (auto p : g.members) {
    features(g, state, p, phi);
    fitted.row(static_cast<Eigen::Index>(p)).noalias() = phi.transpose() * coef;
  }
}

std::vector<std::vector<std::size_t>> group_members(std::size_t n, std::span<const std::size_t> group) {
  if (group.empty()) {
    std::vector<std::size_t> all(n);
    for (std::size_t p = 0; p < n; ++p) all[p] = p;
    return {std::move(all)};
  }
  if (group.size() != n) throw InvalidArgument("group labels must cover every path");
  std::map<std::size_t, std::vector<std::size_t>> by;
  for (std::size_t p = 0; p < n; ++p) by[group[p]].push_back(p);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(by.size());
  for (auto& [id, v] : by) out.push_back(std::move(v));
  return out;
}

void check_shapes(const Eigen::MatrixXd& state, const Eigen::MatrixXd& targets) {
  if (state.rows() != targets.rows()) throw InvalidArgument("state and targets differ in rows");
  if (targets.rows() == 0) throw InvalidArgument("regression needs at least one path");
}

Normal reduce_blocks(const GroupFit& g, const Eigen::MatrixXd& state,
                     const Eigen::MatrixXd& targets, std::size_t block, bool parallel) {
  const std::size_t n = g.members.size();
  const std::size_t nblocks = (n + block - 1) / block;
  std::vector<Normal> parts(nblocks);
  const auto nb = static_cast<std::ptrdiff_t>(nblocks);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const auto lo = static_cast<std::size_t>(b) * block;
    parts[static_cast<std::size_t>(b)] = accumulate_block(g, state, targets, lo, std::min(n, lo + block));
  }
  Normal total = std::move(parts[0]);
  for (std::size_t b = 1; b < nblocks; ++b) {
    total.A += parts[b].A;
    total.r += parts[b].r;
  }
  return total;
}

}  // namespace

Eigen::MatrixXd conditional_expectation(const Eigen::MatrixXd& state,
                                        std::span<const std::size_t> group,
                                        const Eigen::MatrixXd& targets,
                                        const RegressionOptions& options) {
  check_shapes(state, targets);
  const auto n = static_cast<std::size_t>(targets.rows());
  const auto groups = group_members(n, group);
  const std::size_t block = std::max<std::size_t>(options.block, 1);
  Eigen::MatrixXd fitted(targets.rows(), targets.cols());
  if (groups.size() == 1) {
    const auto g = prepare(state, groups[0], options.degree);
    solve_and_fill(g, state, reduce_blocks(g, state, targets, block, true), options.rank_threshold,
                   fitted);
    return fitted;
  }
  std::string failure;
  const auto ng = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < ng; ++k) {
    try {
      const auto g = prepare(state, groups[static_cast<std::size_t>(k)], options.degree);
      solve_and_fill(g, state, reduce_blocks(g, state, targets, block, false),
                     options.rank_threshold, fitted);
    } catch (const std::exception& e) {
#pragma omp critical(lbds_regression_failure)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalError(failure);
  return fitted;
}

Eigen::MatrixXd conditional_expectation_serial(const Eigen::MatrixXd& state,
                                               std::span<const std::size_t> group,
                                               const Eigen::MatrixXd& targets,
                                               const RegressionOptions& options) {
  check_shapes(state, targets);
  const auto n = static_cast<std::size_t>(targets.rows());
  const std::size_t block = std::max<std::size_t>(options.block, 1);
  Eigen::MatrixXd fitted(targets.rows(), targets.cols());
  for (const auto& members : group_members(n, group)) {
    const auto g = prepare(state, members, options.degree);
    solve_and_fill(g, state, reduce_blocks(g, state, targets, block, false), options.rank_threshold,
                   fitted);
  }
  return fitted;
}

}  // namespace lbds
