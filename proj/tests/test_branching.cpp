#include <doctest.h>

#include <cmath>
#include <vector>

#include "mbpi/branching.hpp"
#include "oracles.hpp"

using namespace mbpi;

namespace {

StateVector state(std::initializer_list<std::int64_t> values) {
  StateVector z(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (auto v : values) z[i++] = v;
  return z;
}

// Two-type SEIR branching model (exposed, infectious), no counter.
BranchingModel seir2(double beta, double delta, double lambda) {
  const double omega_i = beta + lambda;
  std::vector<std::vector<ProgenyOutcome>> progeny(2);
  progeny[0] = {{state({0, 1}), 1.0}};
  progeny[1] = {{state({1, 1}), beta / omega_i},
                {state({0, 0}), lambda / omega_i}};
  return BranchingModel({delta, omega_i}, progeny);
}

// Three-type SEIR with observation counter; counter flag optional so tests
// can watch the raw accumulating coordinate.
BranchingModel seir3(double beta, double delta, double lambda, double p,
                     bool flag_counter = true) {
  const double omega_i = beta + lambda;
  std::vector<std::vector<ProgenyOutcome>> progeny(3);
  progeny[0] = {{state({0, 1, 0}), 1.0 - p}, {state({0, 1, 1}), p}};
  progeny[1] = {{state({1, 1, 0}), beta / omega_i},
                {state({0, 0, 0}), lambda / omega_i}};
  std::vector<int> counters;
  if (flag_counter) counters.push_back(2);
  return BranchingModel({delta, omega_i, 0.0}, progeny, {}, counters);
}

BranchingModel pure_death(double omega) {
  std::vector<std::vector<ProgenyOutcome>> progeny(1);
  progeny[0] = {{state({0}), 1.0}};
  return BranchingModel({omega}, progeny);
}

BranchingModel yule(double beta) {
  std::vector<std::vector<ProgenyOutcome>> progeny(1);
  progeny[0] = {{state({2}), 1.0}};
  return BranchingModel({beta}, progeny);
}

// Closed-form mean operator of the two-type SEIR model.
Matrix seir2_mean_closed_form(double beta, double delta, double lambda,
                              double t) {
  const double root = std::sqrt(4.0 * beta * delta +
                                (lambda - delta) * (lambda - delta));
  const double theta1 = 0.5 * (-root - lambda - delta);
  const double theta2 = 0.5 * (root - lambda - delta);
  const double h1 = lambda + theta1;
  const double h2 = lambda + theta2;
  const double e1 = std::exp(theta1 * t);
  const double e2 = std::exp(theta2 * t);
  Matrix m(2, 2);
  m(0, 0) = h1 * e1 - h2 * e2;
  m(0, 1) = h1 * h2 / beta * (e2 - e1);
  m(1, 0) = beta * (e1 - e2);
  m(1, 1) = h1 * e2 - h2 * e1;
  return m / (h1 - h2);
}

constexpr double kBeta = 0.3;
constexpr double kDelta = 0.375;
constexpr double kLambda = 3.0 / 28.0;

}  // namespace

TEST_CASE("build_omega for the two-type SEIR model") {
  const Matrix omega = build_omega(seir2(kBeta, kDelta, kLambda));
  CHECK(omega(0, 0) == doctest::Approx(-0.375));
  CHECK(omega(0, 1) == doctest::Approx(0.375));
  CHECK(omega(1, 0) == doctest::Approx(0.3));
  CHECK(omega(1, 1) == doctest::Approx(-3.0 / 28.0));
}

TEST_CASE("build_omega for the three-type SEIR model with p = 0.75") {
  const Matrix omega = build_omega(seir3(kBeta, kDelta, kLambda, 0.75));
  Matrix expected(3, 3);
  expected << -0.375, 0.375, 0.28125, 0.3, -3.0 / 28.0, 0.0, 0.0, 0.0, 0.0;
  CHECK((omega - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("build_omega for a pure-death type") {
  const Matrix omega = build_omega(pure_death(1.0));
  CHECK(omega(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("build_omega rejects immigration") {
  std::vector<std::vector<ProgenyOutcome>> progeny(1);
  progeny[0] = {{state({0}), 1.0}};
  BranchingModel model({1.0}, progeny, {2.0});
  CHECK_THROWS_AS(build_omega(model), InvalidInputError);
}

TEST_CASE("augment_immigration leaves immigration-free models unchanged") {
  const BranchingModel model = pure_death(1.0);
  const BranchingModel same = augment_immigration(model);
  CHECK(same.type_count() == 1);
  CHECK(!same.has_immigration());
}

TEST_CASE("augment_immigration builds the artificial type") {
  std::vector<std::vector<ProgenyOutcome>> progeny(2);
  progeny[0] = {{state({0, 0}), 1.0}};
  progeny[1] = {{state({0, 0}), 1.0}};
  BranchingModel model({0.0, 0.0}, progeny, {2.0, 0.0});

  const BranchingModel augmented = augment_immigration(model);
  REQUIRE(augmented.type_count() == 3);
  CHECK(!augmented.has_immigration());
  CHECK(augmented.lifetime_rate(2) == doctest::Approx(2.0));
  REQUIRE(augmented.progeny(2).size() == 1);
  CHECK(augmented.progeny(2)[0].offspring[0] == 1);
  CHECK(augmented.progeny(2)[0].offspring[1] == 0);
  CHECK(augmented.progeny(2)[0].offspring[2] == 1);
  CHECK(augmented.progeny(2)[0].probability == doctest::Approx(1.0));
}

TEST_CASE("augmented pure-immigration matches the Poisson arrival mean") {
  // No deaths; type-1 immigration at rate 2. After one unit of time the
  // type-1 count is Poisson(2).
  std::vector<std::vector<ProgenyOutcome>> progeny(2);
  progeny[0] = {{state({0, 0}), 1.0}};
  progeny[1] = {{state({0, 0}), 1.0}};
  BranchingModel model({0.0, 0.0}, progeny, {2.0, 0.0});
  const BranchingModel augmented = augment_immigration(model);

  const int reps = 5000;
  std::vector<double> counts;
  counts.reserve(reps);
  RandomStream root(321);
  const std::vector<double> grid{1.0};
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng = root.substream(rep);
    const auto path = simulate(augmented, state({0, 0, 1}), grid, rng);
    counts.push_back(static_cast<double>(path[0][0]));
  }
  const double mean = oracles::mean_of(counts);
  const double se = oracles::sd_of(counts) / std::sqrt(double(reps));
  CHECK(std::abs(mean - 2.0) <= 4.0 * se);
}

TEST_CASE("variance source for pure death and Yule") {
  const Matrix c_death = build_variance_source(pure_death(0.7));
  CHECK(c_death(0, 0) == doctest::Approx(0.7));

  const Matrix c_yule = build_variance_source(yule(0.5));
  CHECK(c_yule(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("variance source for SEIR matches a brute-force progeny sum") {
  const BranchingModel model = seir2(kBeta, kDelta, kLambda);
  const Matrix c = build_variance_source(model);

  // Direct enumeration of the two infectious outcomes.
  const double omega_i = kBeta + kLambda;
  Matrix expect = Matrix::Zero(2, 2);
  {
    Vector diff(2);
    diff << 1.0, 0.0;  // (1,1) - u_2
    expect += (kBeta / omega_i) * (diff * diff.transpose());
    Vector dead(2);
    dead << 0.0, -1.0;  // (0,0) - u_2
    expect += (kLambda / omega_i) * (dead * dead.transpose());
  }
  expect *= omega_i;
  const Matrix c2 = unvec(c.col(1), 2, 2);
  CHECK((c2 - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("moment operators: pure death closed form") {
  const auto ops = compute_moment_operators(pure_death(1.0));
  const double p_survive = std::exp(-1.0);
  CHECK(ops.mean_op(0, 0) == doctest::Approx(p_survive).epsilon(1e-8));
  CHECK(ops.var_ops[0](0, 0) ==
        doctest::Approx(p_survive * (1.0 - p_survive)).epsilon(1e-8));
}

TEST_CASE("moment operators: Yule closed form") {
  const auto ops = compute_moment_operators(yule(0.5));
  const double growth = std::exp(0.5);
  CHECK(ops.mean_op(0, 0) == doctest::Approx(growth).epsilon(1e-8));
  CHECK(ops.var_ops[0](0, 0) ==
        doctest::Approx(growth * (growth - 1.0)).epsilon(1e-8));
}

TEST_CASE("SEIR characteristic matrix spectrum matches the closed form") {
  const Matrix omega = build_omega(seir2(kBeta, kDelta, kLambda));
  Eigen::EigenSolver<Matrix> eig(omega);
  std::vector<double> values{eig.eigenvalues()[0].real(),
                             eig.eigenvalues()[1].real()};
  std::sort(values.begin(), values.end());
  CHECK(values[0] == doctest::Approx(-0.6022).epsilon(1e-3));
  CHECK(values[1] == doctest::Approx(0.1201).epsilon(1e-3));

  // Dominant left eigenvector, proportional to (1, 1.65).
  Eigen::EigenSolver<Matrix> left(omega.transpose());
  const int top = left.eigenvalues()[0].real() > left.eigenvalues()[1].real()
                      ? 0
                      : 1;
  const auto v = left.eigenvectors().col(top);
  CHECK(std::abs(v[1].real() / v[0].real()) ==
        doctest::Approx(1.65).epsilon(1e-2));
}

TEST_CASE("conditional_mean basics") {
  const auto ops =
      compute_moment_operators(seir3(kBeta, kDelta, kLambda, 0.75));
  const Vector zero = conditional_mean(state({0, 0, 0}), ops);
  CHECK(zero.norm() == 0.0);

  MomentOperators identity_ops;
  identity_ops.mean_op = Matrix::Identity(2, 2);
  identity_ops.var_ops = {Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const Vector same = conditional_mean(state({3, 5}), identity_ops);
  CHECK(same[0] == doctest::Approx(3.0));
  CHECK(same[1] == doctest::Approx(5.0));

  CHECK_THROWS_AS(conditional_mean(state({1, 2}), ops), DimensionError);
}

TEST_CASE("conditional_mean matches the closed-form SEIR mean at t = 1") {
  const double p = 0.75;
  const auto ops = compute_moment_operators(seir3(kBeta, kDelta, kLambda, p));
  const Vector mean = conditional_mean(state({6, 0, 0}), ops);

  const Matrix m = seir2_mean_closed_form(kBeta, kDelta, kLambda, 1.0);
  CHECK(mean[0] == doctest::Approx(6.0 * m(0, 0)).epsilon(1e-8));
  CHECK(mean[1] == doctest::Approx(6.0 * m(0, 1)).epsilon(1e-8));

  // Counter mean: p * delta * integral of the expected exposed count.
  const double root = std::sqrt(4.0 * kBeta * kDelta +
                                (kLambda - kDelta) * (kLambda - kDelta));
  const double theta1 = 0.5 * (-root - kLambda - kDelta);
  const double theta2 = 0.5 * (root - kLambda - kDelta);
  const double h1 = kLambda + theta1;
  const double h2 = kLambda + theta2;
  const double integral =
      (h1 * (std::exp(theta1) - 1.0) / theta1 -
       h2 * (std::exp(theta2) - 1.0) / theta2) /
      (h1 - h2);
  CHECK(mean[2] == doctest::Approx(6.0 * p * kDelta * integral).epsilon(1e-8));
}

TEST_CASE("conditional_var basics") {
  const auto ops =
      compute_moment_operators(seir3(kBeta, kDelta, kLambda, 0.75));
  CHECK(conditional_var(state({0, 0, 0}), ops).norm() == 0.0);

  const auto death_ops = compute_moment_operators(pure_death(1.0));
  const double p_survive = std::exp(-1.0);
  const Matrix var10 = conditional_var(state({10}), death_ops);
  CHECK(var10(0, 0) ==
        doctest::Approx(10.0 * p_survive * (1.0 - p_survive)).epsilon(1e-8));
}

TEST_CASE("moment operators compose over a doubled step") {
  const BranchingModel model = seir3(kBeta, kDelta, kLambda, 0.75);
  const auto ops1 = compute_moment_operators(model, 1.0);
  const auto ops2 = compute_moment_operators(model, 2.0);

  const Matrix composed_mean = ops1.mean_op * ops1.mean_op;
  CHECK((ops2.mean_op - composed_mean).cwiseAbs().maxCoeff() <= 1e-8);

  // Two-step variance from one ancestor of type i:
  // V_i(2) = sum_k F(i,k) V_k(1) + F^T V_i(1) F.
  for (int i = 0; i < 3; ++i) {
    Matrix expected =
        ops1.mean_op.transpose() * ops1.var_ops[i] * ops1.mean_op;
    for (int k = 0; k < 3; ++k)
      expected += ops1.mean_op(i, k) * ops1.var_ops[k];
    CHECK((ops2.var_ops[i] - expected).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("simulate keeps a rate-free model constant") {
  std::vector<std::vector<ProgenyOutcome>> progeny(2);
  progeny[0] = {{state({0, 0}), 1.0}};
  progeny[1] = {{state({0, 0}), 1.0}};
  BranchingModel model({0.0, 0.0}, progeny);

  RandomStream rng(11);
  const auto path = simulate(model, state({4, 7}), {1.0, 2.0, 3.0}, rng);
  for (const auto& z : path) {
    CHECK(z[0] == 4);
    CHECK(z[1] == 7);
  }
}

TEST_CASE("simulate matches the Bernoulli survival mean for pure death") {
  const BranchingModel model = pure_death(1.0);
  const int reps = 10000;
  std::vector<double> survivors;
  survivors.reserve(reps);
  RandomStream root(2026);
  const std::vector<double> grid{1.0};
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng = root.substream(rep);
    survivors.push_back(
        static_cast<double>(simulate(model, state({1000}), grid, rng)[0][0]));
  }
  const double expected = 1000.0 * std::exp(-1.0);
  const double se = oracles::sd_of(survivors) / std::sqrt(double(reps));
  CHECK(std::abs(oracles::mean_of(survivors) - expected) <= 4.0 * se);
}

TEST_CASE("simulated SEIR ensemble tracks the analytic mean path") {
  const BranchingModel model = seir2(kBeta, kDelta, kLambda);
  const std::vector<double> grid{5.0, 15.0, 25.0};
  const int reps = 3000;

  Matrix sums = Matrix::Zero(3, 2);
  Matrix sq_sums = Matrix::Zero(3, 2);
  RandomStream root(515);
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng = root.substream(rep);
    const auto path = simulate(model, state({6, 0}), grid, rng);
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 2; ++i) {
        const double v = static_cast<double>(path[g][i]);
        sums(g, i) += v;
        sq_sums(g, i) += v * v;
      }
  }

  const Matrix omega = build_omega(model);
  for (int g = 0; g < 3; ++g) {
    const Matrix f = mat_exp(Matrix(omega * grid[g]));
    const Vector expected = f.transpose() * state({6, 0}).cast<double>();
    for (int i = 0; i < 2; ++i) {
      const double mean = sums(g, i) / reps;
      const double var = (sq_sums(g, i) - reps * mean * mean) / (reps - 1.0);
      const double se = std::sqrt(var / reps);
      CHECK(std::abs(mean - expected[i]) <= 4.0 * se);
    }
  }
}

TEST_CASE("unit-step simulated moments match the moment operators") {
  // Light version of the moment-consistency check; the acceptance suite runs
  // the full 1e5-replicate version.
  const BranchingModel model = seir3(kBeta, kDelta, kLambda, 0.75);
  const auto ops = compute_moment_operators(model);
  const StateVector z0 = state({6, 0, 0});
  const int reps = 20000;

  std::vector<Vector> draws;
  draws.reserve(reps);
  RandomStream root(99);
  const std::vector<double> grid{1.0};
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng = root.substream(rep);
    draws.push_back(simulate(model, z0, grid, rng)[0].cast<double>());
  }

  Vector mean = Vector::Zero(3);
  for (const auto& d : draws) mean += d;
  mean /= reps;

  const Vector expected_mean = conditional_mean(z0, ops);
  for (int i = 0; i < 3; ++i) {
    double var = 0.0;
    for (const auto& d : draws) var += (d[i] - mean[i]) * (d[i] - mean[i]);
    var /= (reps - 1.0);
    CHECK(std::abs(mean[i] - expected_mean[i]) <= 4.0 * std::sqrt(var / reps));
  }

  const Matrix expected_var = conditional_var(z0, ops);
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      std::vector<double> products;
      products.reserve(reps);
      for (const auto& d : draws)
        products.push_back((d[a] - mean[a]) * (d[b] - mean[b]));
      const double cov = oracles::mean_of(products);
      const double se = oracles::sd_of(products) / std::sqrt(double(reps));
      CHECK(std::abs(cov - expected_var(a, b)) <= 4.0 * se);
    }
}

TEST_CASE("counter coordinates are monotone without resets") {
  const BranchingModel model = seir3(kBeta, kDelta, kLambda, 0.75, false);
  std::vector<double> grid;
  for (int t = 1; t <= 20; ++t) grid.push_back(t);
  RandomStream rng(77);
  const auto path = simulate(model, state({6, 0, 0}), grid, rng);
  for (std::size_t g = 1; g < path.size(); ++g)
    CHECK(path[g][2] >= path[g - 1][2]);
}

TEST_CASE("counter reset records per-step increments") {
  // Same seed, with and without the counter flag: the reset path must equal
  // the increments of the accumulating path.
  std::vector<double> grid;
  for (int t = 1; t <= 15; ++t) grid.push_back(t);

  RandomStream rng_reset(123);
  const auto with_reset = simulate(seir3(kBeta, kDelta, kLambda, 0.75, true),
                                   state({6, 0, 0}), grid, rng_reset);
  RandomStream rng_plain(123);
  const auto no_reset = simulate(seir3(kBeta, kDelta, kLambda, 0.75, false),
                                 state({6, 0, 0}), grid, rng_plain);

  std::int64_t previous = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(with_reset[g][0] == no_reset[g][0]);
    CHECK(with_reset[g][1] == no_reset[g][1]);
    CHECK(with_reset[g][2] == no_reset[g][2] - previous);
    previous = no_reset[g][2];
  }
}

TEST_CASE("simulate is deterministic in the seed") {
  const BranchingModel model = seir3(kBeta, kDelta, kLambda, 0.75);
  std::vector<double> grid{1, 2, 3, 4, 5};
  RandomStream a(42), b(42);
  const auto first = simulate(model, state({6, 0, 0}), grid, a);
  const auto second = simulate(model, state({6, 0, 0}), grid, b);
  for (std::size_t g = 0; g < grid.size(); ++g)
    CHECK((first[g] - second[g]).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("augmented immigration matches direct Poisson immigration") {
  // Two-type model with deaths and direct immigration versus its augmented
  // equivalent started with one artificial agent.
  std::vector<std::vector<ProgenyOutcome>> progeny(2);
  progeny[0] = {{state({0, 1}), 1.0}};
  progeny[1] = {{state({0, 0}), 1.0}};
  BranchingModel direct({0.5, 0.3}, progeny, {2.0, 1.0});
  const BranchingModel augmented = augment_immigration(direct);

  const std::vector<double> grid{3.0};
  const int reps = 4000;
  Matrix direct_draws(reps, 2), augmented_draws(reps, 2);
  RandomStream root_a(900), root_b(901);
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng_a = root_a.substream(rep);
    const auto da = simulate(direct, state({5, 2}), grid, rng_a);
    direct_draws(rep, 0) = static_cast<double>(da[0][0]);
    direct_draws(rep, 1) = static_cast<double>(da[0][1]);

    RandomStream rng_b = root_b.substream(rep);
    const auto db = simulate(augmented, state({5, 2, 1}), grid, rng_b);
    augmented_draws(rep, 0) = static_cast<double>(db[0][0]);
    augmented_draws(rep, 1) = static_cast<double>(db[0][1]);
  }

  for (int i = 0; i < 2; ++i) {
    const double mean_a = direct_draws.col(i).mean();
    const double mean_b = augmented_draws.col(i).mean();
    const double var_a =
        (direct_draws.col(i).array() - mean_a).square().sum() / (reps - 1.0);
    const double var_b =
        (augmented_draws.col(i).array() - mean_b).square().sum() /
        (reps - 1.0);
    const double se = std::sqrt((var_a + var_b) / reps);
    CHECK(std::abs(mean_a - mean_b) <= 4.0 * se);
  }
}

TEST_CASE("model validation rejects bad inputs") {
  std::vector<std::vector<ProgenyOutcome>> progeny(1);
  progeny[0] = {{state({0}), 0.5}};  // probabilities sum to 0.5
  CHECK_THROWS_AS(BranchingModel({1.0}, progeny), InvalidInputError);

  std::vector<std::vector<ProgenyOutcome>> ok(1);
  ok[0] = {{state({0}), 1.0}};
  CHECK_THROWS_AS(BranchingModel({-1.0}, ok), InvalidInputError);
  CHECK_THROWS_AS(BranchingModel({1.0}, ok, {}, {0}), InvalidInputError);
  CHECK_NOTHROW(BranchingModel({0.0}, ok, {}, {0}));
}
