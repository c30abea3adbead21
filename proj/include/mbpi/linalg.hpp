#pragma once

#include <Eigen/Dense>

#include "mbpi/errors.hpp"

namespace mbpi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// e^A by scaling-and-squaring with diagonal Pade approximants and norm-based
// degree selection. tol is the requested relative accuracy in (0, 1e-6];
// the achieved accuracy saturates near machine precision on well-conditioned
// inputs. Throws DimensionError for non-square A and InvalidInputError for
// non-finite entries or an out-of-range tol.
Matrix mat_exp(const Matrix& a, double tol = 1e-12);

// Kronecker product, dimensions (rows_a*rows_b) x (cols_a*cols_b).
Matrix kron(const Matrix& a, const Matrix& b);

// Column-stacking vectorization and its inverse.
Vector vec(const Matrix& a);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

// Cholesky factorization of a symmetric positive definite matrix. The input
// is symmetrized as (A + A^T)/2 before factorizing; covariance matrices
// accumulate asymmetry from rounding. A failed pivot reports the 1-based
// index of the offending leading minor through NumericalError.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& a);

  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  double logdet() const;
  const Matrix& lower() const { return l_; }

 private:
  Matrix l_;
};

// Solves A X = B for symmetric positive definite A.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// log det(A) for symmetric positive definite A via a triangular factorization.
double logdet_spd(const Matrix& a);

// Symmetrizes and clamps negative eigenvalues at zero. Used to repair
// covariance matrices after round-off; throws NumericalError if an eigenvalue
// is more negative than -tol * max(1, scale).
Matrix clamp_psd(const Matrix& a, double tol = 1e-8);

// Log-density of N(mean, cov) at x. cov must be positive definite.
double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov);

// Quantile function of the standard normal distribution.
double std_normal_quantile(double p);

}  // namespace mbpi
