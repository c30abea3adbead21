#include "mbpi/linalg.hpp"

#include <cmath>
#include <limits>

namespace mbpi {

namespace {

double one_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Diagonal Pade approximant r_m(A) = (-U + V)^{-1} (U + V) with U odd and V
// even in A. Coefficients are the standard b_k for degrees 3..13.
Matrix pade_low(const Matrix& a, int m) {
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;

  Matrix u, v;
  switch (m) {
    case 3: {
      static const double b[] = {120, 60, 12, 1};
      u = a * (b[3] * a2 + b[1] * ident);
      v = b[2] * a2 + b[0] * ident;
      break;
    }
    case 5: {
      static const double b[] = {30240, 15120, 3360, 420, 30, 1};
      const Matrix a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * ident);
      v = b[4] * a4 + b[2] * a2 + b[0] * ident;
      break;
    }
    case 7: {
      static const double b[] = {17297280, 8648640, 1995840, 277200,
                                 25200,    1512,    56,      1};
      const Matrix a4 = a2 * a2;
      const Matrix a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
      break;
    }
    default: {  // m == 9
      static const double b[] = {17643225600., 8821612800., 2075673600.,
                                 302702400.,   30270240.,   2162160.,
                                 110880.,      3960.,       90.,
                                 1.};
      const Matrix a4 = a2 * a2;
      const Matrix a6 = a4 * a2;
      const Matrix a8 = a4 * a4;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
      break;
    }
  }
  return Eigen::PartialPivLU<Matrix>(v - u).solve(u + v);
}

Matrix pade13(const Matrix& a) {
  static const double b[] = {64764752532480000., 32382376266240000.,
                             7771770303897600.,  1187353796428800.,
                             129060195264000.,   10559470521600.,
                             670442572800.,      33522128640.,
                             1323241920.,        40840800.,
                             960960.,            16380.,
                             182.,               1.};
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
           b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                   b[4] * a4 + b[2] * a2 + b[0] * ident;
  return Eigen::PartialPivLU<Matrix>(v - u).solve(u + v);
}

}  // namespace

Matrix mat_exp(const Matrix& a, double tol) {
  if (a.rows() != a.cols())
    throw DimensionError("mat_exp: matrix must be square");
  if (!a.allFinite())
    throw InvalidInputError("mat_exp: input has non-finite entries");
  if (!(tol > 0.0) || tol > 1e-6)
    throw InvalidInputError("mat_exp: tol must lie in (0, 1e-6]");
  if (a.rows() == 0) return Matrix(0, 0);

  // Backward-error bounds theta_m for the degree-m approximant at double
  // precision (Higham 2005, Table 2.3).
  static const struct {
    int degree;
    double theta;
  } kBounds[] = {{3, 1.495585217958292e-2},
                 {5, 2.539398330063230e-1},
                 {7, 9.504178996162932e-1},
                 {9, 2.097847961257068e0}};
  static const double kTheta13 = 5.371920351148152e0;

  const double norm = one_norm(a);
  for (const auto& bound : kBounds)
    if (norm <= bound.theta) return pade_low(a, bound.degree);

  int squarings = 0;
  if (norm > kTheta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  Matrix x = pade13(a / std::pow(2.0, squarings));
  for (int i = 0; i < squarings; ++i) x = x * x;
  return x;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols)
    throw DimensionError("unvec: length does not match rows*cols");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

SpdFactor::SpdFactor(const Matrix& a) {
  if (a.rows() != a.cols())
    throw DimensionError("SpdFactor: matrix must be square");
  const Eigen::Index n = a.rows();
  const Matrix s = 0.5 * (a + a.transpose());
  l_ = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = s(j, j) - l_.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("SpdFactor: matrix is not positive definite",
                           static_cast<int>(j) + 1);
    l_(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double off =
          s(i, j) - l_.row(i).head(j).dot(l_.row(j).head(j));
      l_(i, j) = off / l_(j, j);
    }
  }
}

Matrix SpdFactor::solve(const Matrix& b) const {
  if (b.rows() != l_.rows())
    throw DimensionError("SpdFactor::solve: dimension mismatch");
  Matrix y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector SpdFactor::solve(const Vector& b) const {
  return solve(Matrix(b)).col(0);
}

double SpdFactor::logdet() const {
  return 2.0 * l_.diagonal().array().log().sum();
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  return SpdFactor(a).solve(b);
}

double logdet_spd(const Matrix& a) { return SpdFactor(a).logdet(); }

Matrix clamp_psd(const Matrix& a, double tol) {
  const Matrix s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success)
    throw NumericalError("clamp_psd: eigendecomposition failed");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -tol * scale)
    throw NumericalError("clamp_psd: matrix is not positive semidefinite");
  Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lambda.asDiagonal() *
         eig.eigenvectors().transpose();
}

double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size())
    throw DimensionError("mvn_logpdf: dimension mismatch");
  const SpdFactor factor(cov);
  const Vector diff = x - mean;
  const Vector solved = factor.solve(diff);
  static const double kLog2Pi = 1.8378770664093454836;
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + factor.logdet() +
                 diff.dot(solved));
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidInputError("std_normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation, then one Halley refinement with erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) *
                   std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace mbpi
