#include "lbds/martingale_basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lbds/error.hpp"

namespace lbds {
namespace {

constexpr double kRankTol = 1e-12;
constexpr double kDiagonalTol = 1e-8;

double horner(const Eigen::MatrixXd& alpha, std::size_t n, double e) {
  double v = 0.0;
  for (Eigen::Index k = static_cast<Eigen::Index>(n); k >= 0; --k) v = v * e + alpha(n, k);
  return v;
}

}  // namespace

MartingaleBasis MartingaleBasis::empty(const LevyCharacteristics& chars) {
  MartingaleBasis b(chars);
  b.alpha_ = Eigen::MatrixXd(0, 0);
  return b;
}

double MartingaleBasis::q(std::size_t n, double e) const {
  if (n >= dimension()) throw InvalidArgument("basis index out of range");
  return horner(alpha_, n, e);
}

BasisPolynomials MartingaleBasis::polynomials() const {
  BasisPolynomials out;
  const std::size_t d = dimension();
  for (std::size_t n = 0; n < d; ++n) {
    std::vector<double> q(n + 1), p(n + 2, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      q[k] = alpha_(n, k);
      p[k + 1] = alpha_(n, k);
    }
    out.q.push_back(std::move(q));
    out.p.push_back(std::move(p));
  }
  return out;
}

double MartingaleBasis::gamma(std::size_t k, double t) const { return lbds::gamma(*this, k, t); }

double MartingaleBasis::bracket_integral(std::size_t k, double a, double b) const {
  if (k >= dimension()) throw InvalidArgument("basis index out of range");
  if (chars_.mode() == Modulation::proportional) return chars_.modulation_integral(a, b);
  return integrate(
      [this, k](double t) {
        double g = lbds::gamma(*this, k, t);
        return g * g;
      },
      a, b);
}

MartingaleBasis build_basis(const LevyCharacteristics& chars) {
  MartingaleBasis basis(chars);

  // pi_0 support, merging coincident atoms.
  std::map<double, double> support;
  const double c0 = chars.reference_diffusion();
  if (c0 > 0.0) support[0.0] += c0;
  const auto atoms = chars.atoms();
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    double w = atoms[j].size * atoms[j].size * chars.reference_intensity(j);
    if (w <= 0.0) continue;
    auto [it, inserted] = support.try_emplace(atoms[j].size, 0.0);
    if (!inserted) {
      std::ostringstream msg;
      msg << "atoms coincide at e=" << atoms[j].size << "; basis dimension reduced";
      basis.warnings_.push_back(msg.str());
    }
    it->second += w;
  }
  if (support.empty())
    throw InvalidArgument("degenerate reference measure: all pi-weights are zero");
  for (const auto& [e, w] : support) basis.reference_.push_back({e, w});

  const std::size_t m = basis.reference_.size();
  auto inner = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += basis.reference_[i].weight * u[i] * v[i];
    return s;
  };

  // Coefficients and support values of the orthonormal polynomials.
  std::vector<Eigen::VectorXd> coef, vals;
  for (std::size_t n = 0; n < m; ++n) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    c[static_cast<Eigen::Index>(n)] = 1.0;
    Eigen::VectorXd v(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) v[i] = std::pow(basis.reference_[i].location, n);
    const double norm0 = std::sqrt(inner(v, v));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < coef.size(); ++j) {
        double proj = inner(v, vals[j]);
        v -= proj * vals[j];
        c -= proj * coef[j];
      }
    }
    double norm = std::sqrt(inner(v, v));
    if (!(norm > kRankTol * std::max(1.0, norm0))) {
      basis.warnings_.push_back("monomial e^" + std::to_string(n) +
                                " is dependent in L2(pi_0); basis dimension reduced");
      break;
    }
    coef.push_back(c / norm);
    vals.push_back(v / norm);
  }

  const auto d = static_cast<Eigen::Index>(coef.size());
  basis.alpha_ = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index k = 0; k <= n; ++k) basis.alpha_(n, k) = coef[n][k];
  return basis;
}

Eigen::MatrixXd instantaneous_gram(const MartingaleBasis& basis, const LevyCharacteristics& chars,
                                   double t) {
  chars.check_time(t);
  const auto d = static_cast<Eigen::Index>(basis.dimension());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  const double c = chars.diffusion()(t);
  Eigen::VectorXd qv(d);
  if (c > 0.0) {
    for (Eigen::Index i = 0; i < d; ++i) qv[i] = basis.q(i, 0.0);
    g += c * qv * qv.transpose();
  }
  for (const auto& a : chars.atoms()) {
    double w = a.size * a.size * a.intensity(t);
    if (w == 0.0) continue;
    for (Eigen::Index i = 0; i < d; ++i) qv[i] = basis.q(i, a.size);
    g += w * qv * qv.transpose();
  }
  return g;
}

double gamma(const MartingaleBasis& basis, std::size_t k, double t) {
  if (k >= basis.dimension()) throw InvalidArgument("basis index out of range");
  const auto& chars = basis.characteristics();
  chars.check_time(t);
  if (chars.mode() == Modulation::proportional) return std::sqrt(chars.modulation(t));
  Eigen::MatrixXd g = instantaneous_gram(basis, chars, t);
  double off = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      if (i != j) off = std::max(off, std::abs(g(i, j)));
  if (off > kDiagonalTol) {
    std::ostringstream msg;
    msg << "instantaneous bracket is not diagonal at t=" << t << " (max off-diagonal " << off
        << "); see check_diagonal_bracket";
    throw InvalidArgument(msg.str());
  }
  return std::sqrt(std::max(0.0, g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
}

DiagonalBracketCheck check_diagonal_bracket(const MartingaleBasis& basis,
                                            const LevyCharacteristics& chars,
                                            std::span<const double> grid) {
  DiagonalBracketCheck out;
  for (double t : grid) {
    Eigen::MatrixXd g = instantaneous_gram(basis, chars, t);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        if (i != j) out.max_off_diagonal = std::max(out.max_off_diagonal, std::abs(g(i, j)));
  }
  out.diagonal = out.max_off_diagonal <= kDiagonalTol;
  return out;
}

Eigen::VectorXd project_on_basis(const MartingaleBasis& basis, const LevyCharacteristics& chars,
                                 const std::function<double(double t, double e)>& hbar, double t) {
  chars.check_time(t);
  const auto d = static_cast<Eigen::Index>(basis.dimension());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (const auto& a : chars.atoms()) {
    const double lam = a.intensity(t);
    if (lam == 0.0) continue;
    const double h = hbar(t, a.size);
    for (Eigen::Index i = 0; i < d; ++i) out[i] += h * basis.p(i, a.size) * lam;
  }
  return out;
}

}  // namespace lbds
