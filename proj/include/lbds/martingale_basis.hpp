#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lbds/levy_model.hpp"

namespace lbds {

/// Support point of the reference measure pi_0 = c0 delta_0 + sum e_j^2 lambda_j delta_{e_j}.
struct ReferenceAtom {
  double location = 0.0;
  double weight = 0.0;
};

/// q_n(e) = sum_k alpha(n,k) e^k and p_n(e) = e q_n(e), coefficients in
/// ascending powers.
struct BasisPolynomials {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> p;
};

/// Orthonormalized power-jump martingales H^(1..d) built from a set of
/// characteristics. Indices are 0-based: component k here is H^(k+1).
class MartingaleBasis {
 public:
  /// Basis of dimension zero (no martingale directions).
  static MartingaleBasis empty(const LevyCharacteristics& chars);

  std::size_t dimension() const { return static_cast<std::size_t>(alpha_.rows()); }
  /// Lower-triangular alpha(n, k): coefficient of e^k in q_n.
  const Eigen::MatrixXd& alpha() const { return alpha_; }
  std::span<const ReferenceAtom> reference_measure() const { return reference_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const LevyCharacteristics& characteristics() const { return chars_; }

  double q(std::size_t n, double e) const;
  double p(std::size_t n, double e) const { return e * q(n, e); }
  BasisPolynomials polynomials() const;

  /// Scaling gamma^(k)(t); see lbds::gamma.
  double gamma(std::size_t k, double t) const;
  /// Integral of gamma^(k)(s)^2 over [a, b]: the bracket increment of H^(k).
  double bracket_integral(std::size_t k, double a, double b) const;

 private:
  friend MartingaleBasis build_basis(const LevyCharacteristics& chars);
  explicit MartingaleBasis(LevyCharacteristics chars) : chars_(std::move(chars)) {}

  LevyCharacteristics chars_;
  Eigen::MatrixXd alpha_;
  std::vector<ReferenceAtom> reference_;
  std::vector<std::string> warnings_;
};

/// Gram-Schmidt of 1, e, e^2, ... against pi_0 with a re-orthogonalization
/// pass; alpha(n,n) > 0. Throws InvalidArgument if pi_0 has no mass.
MartingaleBasis build_basis(const LevyCharacteristics& chars);

/// gamma^(k)(t) = sqrt(r(t)) in proportional mode. In general mode it is
/// sqrt(G_kk(t)) and requires the instantaneous Gram matrix to be diagonal.
double gamma(const MartingaleBasis& basis, std::size_t k, double t);

/// G_ij(t) = c(t) q_i(0) q_j(0) + sum_j' q_i(e) q_j(e) e^2 intensity(t).
Eigen::MatrixXd instantaneous_gram(const MartingaleBasis& basis, const LevyCharacteristics& chars,
                                   double t);

struct DiagonalBracketCheck {
  bool diagonal = true;
  double max_off_diagonal = 0.0;
};

DiagonalBracketCheck check_diagonal_bracket(const MartingaleBasis& basis,
                                            const LevyCharacteristics& chars,
                                            std::span<const double> grid);

/// Component i = sum_j hbar(t, e_j) p_i(e_j) intensity_j(t).
Eigen::VectorXd project_on_basis(const MartingaleBasis& basis, const LevyCharacteristics& chars,
                                 const std::function<double(double t, double e)>& hbar, double t);

}  // namespace lbds
