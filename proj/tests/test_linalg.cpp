#include <doctest.h>

#include <cmath>

#include "mbpi/linalg.hpp"
#include "mbpi/rng.hpp"
#include "oracles.hpp"

using namespace mbpi;

namespace {

Matrix random_matrix(RandomStream& rng, int n, double scale) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = scale * (rng.uniform() - 0.5);
  return a;
}

}  // namespace

TEST_CASE("mat_exp basic cases") {
  CHECK((mat_exp(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() ==
        doctest::Approx(0.0).epsilon(1e-14));

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 1.0;
  diag(1, 1) = -1.0;
  const Matrix e = mat_exp(diag);
  CHECK(e(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
  CHECK(e(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(std::abs(e(0, 1)) < 1e-15);

  Matrix nilpotent = Matrix::Zero(2, 2);
  nilpotent(0, 1) = 1.0;
  const Matrix en = mat_exp(nilpotent);
  CHECK(en(0, 0) == doctest::Approx(1.0));
  CHECK(en(0, 1) == doctest::Approx(1.0));
  CHECK(en(1, 0) == doctest::Approx(0.0));
  CHECK(en(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("mat_exp input validation") {
  CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 3)), DimensionError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(mat_exp(bad), InvalidInputError);
  CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 2), 1e-3), InvalidInputError);
  CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 2), 0.0), InvalidInputError);
}

TEST_CASE("mat_exp semigroup property on random matrices") {
  RandomStream rng(20240801);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(5));
    Matrix a = random_matrix(rng, n, 1.0);
    a *= 5.0 / std::max(1.0, a.cwiseAbs().colwise().sum().maxCoeff());
    const Matrix once = mat_exp(a);
    const Matrix twice = mat_exp(Matrix(2.0 * a));
    CHECK((once * once - twice).norm() <= 1e-8 * twice.norm());
  }
}

TEST_CASE("mat_exp of a generator preserves row sums") {
  RandomStream rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(rng.below(4));
    Matrix q(n, n);
    for (int i = 0; i < n; ++i) {
      double off = 0.0;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        q(i, j) = 2.0 * rng.uniform();
        off += q(i, j);
      }
      q(i, i) = -off;
    }
    const Matrix p = mat_exp(q);
    for (int i = 0; i < n; ++i)
      CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("mat_exp agrees with an independent Taylor oracle") {
  RandomStream rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = random_matrix(rng, 4, 3.0);
    const Matrix expected = oracles::taylor_expm(a);
    CHECK((mat_exp(a) - expected).norm() <= 1e-10 * expected.norm());
  }
}

TEST_CASE("kron basics") {
  Matrix b(2, 2);
  b << 1, 2, 3, 4;

  const Matrix block = kron(Matrix::Identity(2, 2), b);
  CHECK(block.rows() == 4);
  CHECK((block.topLeftCorner(2, 2) - b).norm() == 0.0);
  CHECK((block.bottomRightCorner(2, 2) - b).norm() == 0.0);
  CHECK(block.topRightCorner(2, 2).norm() == 0.0);

  const Matrix scaled = kron(Matrix::Constant(1, 1, 2.0), b);
  CHECK((scaled - 2.0 * b).norm() == 0.0);
}

TEST_CASE("kron indices match the defining loop") {
  RandomStream rng(3);
  const Matrix a = random_matrix(rng, 3, 2.0);
  const Matrix b = random_matrix(rng, 2, 2.0);
  const Matrix k = kron(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q)
          CHECK(k(i * 2 + p, j * 2 + q) == doctest::Approx(a(i, j) * b(p, q)));
}

TEST_CASE("kron is bilinear") {
  RandomStream rng(4);
  const Matrix a = random_matrix(rng, 3, 1.0);
  const Matrix b = random_matrix(rng, 3, 1.0);
  const Matrix c = random_matrix(rng, 2, 1.0);
  const Matrix lhs = kron(a + b, c);
  const Matrix rhs = kron(a, c) + kron(b, c);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("vec and unvec") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  const Vector v = vec(a);
  CHECK(v[0] == 1);
  CHECK(v[1] == 3);
  CHECK(v[2] == 2);
  CHECK(v[3] == 4);

  RandomStream rng(5);
  Matrix b(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) b(i, j) = rng.uniform();
  CHECK((unvec(vec(b), 3, 4) - b).norm() == 0.0);
  CHECK_THROWS_AS(unvec(vec(b), 4, 4), DimensionError);
}

TEST_CASE("vec of a triple product matches the Kronecker identity") {
  RandomStream rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix a = random_matrix(rng, 2, 1.5);
    const Matrix x = random_matrix(rng, 2, 1.5);
    const Matrix b = random_matrix(rng, 2, 1.5);
    const Vector lhs = vec(Matrix(a * x * b));
    const Vector rhs = kron(b.transpose(), a) * vec(x);
    CHECK((lhs - rhs).norm() <= 1e-12);
  }
}

TEST_CASE("solve_spd and logdet_spd") {
  Matrix b(2, 3);
  b << 1, 2, 3, 4, 5, 6;
  CHECK((solve_spd(Matrix::Identity(2, 2), b) - b).norm() == 0.0);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 3.0;
  CHECK(logdet_spd(d) == doctest::Approx(std::log(6.0)));

  RandomStream rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const Matrix m = random_matrix(rng, n, 2.0);
    const Matrix spd = m.transpose() * m + Matrix::Identity(n, n);
    const Matrix inv = solve_spd(spd, Matrix::Identity(n, n));
    CHECK((inv * spd - Matrix::Identity(n, n)).norm() <= 1e-10 * spd.norm());
  }
}

TEST_CASE("solve_spd reports the offending leading minor") {
  Matrix a = Matrix::Identity(3, 3);
  a(2, 2) = -1.0;
  try {
    solve_spd(a, Matrix::Identity(3, 3));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.leading_minor == 3);
  }
}

TEST_CASE("mvn_logpdf matches the scalar normal") {
  const Vector x = Vector::Constant(1, 1.3);
  const Vector mu = Vector::Constant(1, 0.8);
  const Matrix cov = Matrix::Constant(1, 1, 2.0);
  const double expected = -0.5 * (std::log(2.0 * M_PI * 2.0) + 0.25 / 2.0);
  CHECK(mvn_logpdf(x, mu, cov) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("std_normal_quantile inverts the normal CDF") {
  for (double p : {0.001, 0.025, 0.1, 0.5, 0.9, 0.975, 0.999}) {
    const double z = std_normal_quantile(p);
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(cdf == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(std_normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
}
