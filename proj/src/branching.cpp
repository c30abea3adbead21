#include "mbpi/branching.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace mbpi {

BranchingModel::BranchingModel(std::vector<double> lifetime_rates,
                               std::vector<std::vector<ProgenyOutcome>> progeny,
                               std::vector<double> immigration_rates,
                               std::vector<int> counter_types)
    : lifetime_rates_(std::move(lifetime_rates)),
      progeny_(std::move(progeny)),
      immigration_rates_(std::move(immigration_rates)),
      counter_types_(std::move(counter_types)) {
  const int r = type_count();
  if (immigration_rates_.empty()) immigration_rates_.assign(r, 0.0);
  std::sort(counter_types_.begin(), counter_types_.end());
  is_counter_.assign(r, 0);
  for (int c : counter_types_) {
    if (c < 0 || c >= r)
      throw InvalidInputError("BranchingModel: counter type out of range");
    is_counter_[c] = 1;
  }
  validate();

  total_immigration_ = 0.0;
  for (double a : immigration_rates_) total_immigration_ += a;

  progeny_cdf_.resize(r);
  for (int i = 0; i < r; ++i) {
    double cum = 0.0;
    progeny_cdf_[i].reserve(progeny_[i].size());
    for (const auto& outcome : progeny_[i]) {
      cum += outcome.probability;
      progeny_cdf_[i].push_back(cum);
    }
    if (!progeny_cdf_[i].empty()) progeny_cdf_[i].back() = 1.0;
  }
}

void BranchingModel::validate() const {
  const int r = type_count();
  if (static_cast<int>(progeny_.size()) != r ||
      static_cast<int>(immigration_rates_.size()) != r)
    throw DimensionError("BranchingModel: field sizes disagree");
  for (int i = 0; i < r; ++i) {
    const double rate = lifetime_rates_[i];
    if (!std::isfinite(rate) || rate < 0.0)
      throw InvalidInputError("BranchingModel: lifetime rates must be finite and >= 0");
    if (!std::isfinite(immigration_rates_[i]) || immigration_rates_[i] < 0.0)
      throw InvalidInputError("BranchingModel: immigration rates must be finite and >= 0");
    if (is_counter_[i] && rate != 0.0)
      throw InvalidInputError("BranchingModel: counter types must have zero lifetime rate");

    double total = 0.0;
    for (const auto& outcome : progeny_[i]) {
      if (outcome.offspring.size() != r)
        throw DimensionError("BranchingModel: offspring vector has wrong length");
      if ((outcome.offspring.array() < 0).any())
        throw InvalidInputError("BranchingModel: offspring counts must be >= 0");
      if (!std::isfinite(outcome.probability) || outcome.probability < 0.0 ||
          outcome.probability > 1.0)
        throw InvalidInputError("BranchingModel: progeny probabilities must lie in [0, 1]");
      total += outcome.probability;
    }
    // Progeny of a type that never dies is arbitrary and never used.
    if (rate > 0.0) {
      if (progeny_[i].empty())
        throw InvalidInputError("BranchingModel: active type has no progeny outcomes");
      if (std::abs(total - 1.0) > 1e-12)
        throw InvalidInputError("BranchingModel: progeny probabilities must sum to 1");
    }
  }
}

double BranchingModel::mean_progeny(int i, int k) const {
  double sum = 0.0;
  for (const auto& outcome : progeny_[i])
    sum += static_cast<double>(outcome.offspring[k]) * outcome.probability;
  return sum;
}

Matrix build_omega(const BranchingModel& model) {
  if (model.has_immigration())
    throw InvalidInputError(
        "build_omega: apply augment_immigration before building Omega");
  const int r = model.type_count();
  Matrix omega(r, r);
  for (int i = 0; i < r; ++i) {
    const double rate = model.lifetime_rate(i);
    for (int k = 0; k < r; ++k) {
      const double f = model.mean_progeny(i, k);
      omega(i, k) = rate * (i == k ? f - 1.0 : f);
    }
  }
  return omega;
}

BranchingModel augment_immigration(const BranchingModel& model) {
  if (!model.has_immigration()) return model;

  const int r = model.type_count();
  std::vector<double> rates;
  std::vector<std::vector<ProgenyOutcome>> progeny;
  std::vector<double> alpha(r + 1, 0.0);
  rates.reserve(r + 1);
  progeny.reserve(r + 1);

  for (int i = 0; i < r; ++i) {
    rates.push_back(model.lifetime_rate(i));
    std::vector<ProgenyOutcome> outcomes;
    outcomes.reserve(model.progeny(i).size());
    for (const auto& outcome : model.progeny(i)) {
      StateVector extended = StateVector::Zero(r + 1);
      extended.head(r) = outcome.offspring;
      outcomes.push_back({std::move(extended), outcome.probability});
    }
    progeny.push_back(std::move(outcomes));
  }

  // The artificial type replaces itself and produces one immigrant of type i
  // with probability alpha_i / sum(alpha).
  const double total = model.total_immigration_rate();
  rates.push_back(total);
  std::vector<ProgenyOutcome> arrivals;
  for (int i = 0; i < r; ++i) {
    if (model.immigration_rate(i) <= 0.0) continue;
    StateVector offspring = StateVector::Zero(r + 1);
    offspring[i] = 1;
    offspring[r] = 1;
    arrivals.push_back({std::move(offspring), model.immigration_rate(i) / total});
  }
  progeny.push_back(std::move(arrivals));

  return BranchingModel(std::move(rates), std::move(progeny), std::move(alpha),
                        model.counter_types());
}

Matrix build_variance_source(const BranchingModel& model) {
  const int r = model.type_count();
  Matrix c = Matrix::Zero(r * r, r);
  for (int i = 0; i < r; ++i) {
    const double rate = model.lifetime_rate(i);
    if (rate == 0.0) continue;
    Matrix ci = Matrix::Zero(r, r);
    for (const auto& outcome : model.progeny(i)) {
      Vector diff = outcome.offspring.cast<double>();
      diff[i] -= 1.0;
      ci.noalias() += outcome.probability * (diff * diff.transpose());
    }
    c.col(i) = vec(Matrix(rate * ci));
  }
  return c;
}

MomentOperators compute_moment_operators(const BranchingModel& model,
                                         double step) {
  if (model.has_immigration())
    throw InvalidInputError(
        "compute_moment_operators: apply augment_immigration first");
  if (!(step > 0.0))
    throw InvalidInputError("compute_moment_operators: step must be positive");

  const int r = model.type_count();
  const Matrix omega = build_omega(model);
  const Matrix mean_op = mat_exp(omega * step);

  const Matrix omega_t = omega.transpose();
  const Matrix ident = Matrix::Identity(r, r);
  const Matrix kron_sum = kron(omega_t, ident) + kron(ident, omega_t);
  const Matrix source = build_variance_source(model);

  Matrix block = Matrix::Zero(r * r + r, r * r + r);
  block.topLeftCorner(r * r, r * r) = kron_sum;
  block.topRightCorner(r * r, r) = source;
  block.bottomRightCorner(r, r) = omega_t;

  const Matrix block_exp = mat_exp(block * step);

  // The lower-right quadrant reproduces F^T; a mismatch means the exponential
  // lost accuracy.
  const double scale = std::max(1.0, mean_op.cwiseAbs().maxCoeff());
  const double mismatch =
      (block_exp.bottomRightCorner(r, r) - mean_op.transpose())
          .cwiseAbs()
          .maxCoeff();
  if (mismatch > 1e-8 * scale)
    throw NumericalError(
        "compute_moment_operators: block exponential is inconsistent with F");

  MomentOperators ops;
  ops.mean_op = mean_op;
  ops.step = step;
  ops.var_ops.reserve(r);
  for (int i = 0; i < r; ++i) {
    Matrix vi = unvec(block_exp.topRightCorner(r * r, r).col(i), r, r);
    const double vi_scale = std::max(1.0, vi.cwiseAbs().maxCoeff());
    if ((vi - vi.transpose()).cwiseAbs().maxCoeff() > 1e-10 * vi_scale)
      throw NumericalError("compute_moment_operators: V_i is not symmetric");
    vi = 0.5 * (vi + vi.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(vi, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * vi_scale)
      throw NumericalError(
          "compute_moment_operators: V_i is not positive semidefinite");
    ops.var_ops.push_back(std::move(vi));
  }
  return ops;
}

Vector conditional_mean(const StateVector& z, const MomentOperators& ops) {
  if (z.size() != ops.mean_op.rows())
    throw DimensionError("conditional_mean: dimension mismatch");
  return ops.mean_op.transpose() * z.cast<double>();
}

Matrix conditional_var(const StateVector& z, const MomentOperators& ops) {
  const int r = static_cast<int>(z.size());
  if (r != static_cast<int>(ops.var_ops.size()))
    throw DimensionError("conditional_var: dimension mismatch");
  Matrix out = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i)
    if (z[i] != 0) out += static_cast<double>(z[i]) * ops.var_ops[i];
  return out;
}

std::vector<StateVector> simulate(const BranchingModel& model,
                                  const StateVector& z0,
                                  const std::vector<double>& grid,
                                  RandomStream& rng,
                                  std::vector<SimEvent>* event_log) {
  const int r = model.type_count();
  if (z0.size() != r) throw DimensionError("simulate: z0 has wrong length");
  if ((z0.array() < 0).any())
    throw InvalidInputError("simulate: z0 entries must be >= 0");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] < 0.0 || (g > 0 && grid[g] < grid[g - 1]))
      throw InvalidInputError("simulate: grid must be sorted and >= 0");
  }

  std::vector<StateVector> out;
  out.reserve(grid.size());

  StateVector z = z0;
  std::int64_t* zp = z.data();
  const double alpha_total = model.total_immigration_rate();

  auto total_rate = [&] {
    double total = alpha_total;
    for (int i = 0; i < r; ++i)
      total += model.lifetime_rate(i) * static_cast<double>(zp[i]);
    return total;
  };

  auto record_and_reset = [&] {
    out.push_back(z);
    for (int c : model.counter_types()) zp[c] = 0;
  };

  double t = 0.0;
  std::size_t g = 0;
  double total = total_rate();

  while (g < grid.size()) {
    if (total <= 0.0) {
      // Extinct (or frozen): the state can no longer change.
      record_and_reset();
      ++g;
      continue;
    }
    const double dt = rng.exponential(total);
    if (t + dt >= grid[g]) {
      // Exponential clocks are memoryless, so the partial wait is discarded
      // and redrawn after the grid point.
      t = grid[g];
      record_and_reset();
      ++g;
      continue;
    }
    t += dt;

    double u = rng.uniform() * total;
    int type = -1;
    for (int i = 0; i < r; ++i) {
      const double rate = model.lifetime_rate(i) * static_cast<double>(zp[i]);
      if (u < rate) {
        type = i;
        break;
      }
      u -= rate;
    }

    if (type >= 0) {
      // Death of one type agent plus progeny from its outcome distribution.
      const auto& cdf = model.progeny_cdf(type);
      const double v = rng.uniform();
      std::size_t pick = 0;
      while (pick + 1 < cdf.size() && v >= cdf[pick]) ++pick;
      zp[type] -= 1;
      z += model.progeny(type)[pick].offspring;
      if (event_log)
        event_log->push_back({t, type, static_cast<int>(pick)});
    } else {
      // Immigration arrival.
      int arrival = r - 1;
      for (int i = 0; i < r; ++i) {
        if (u < model.immigration_rate(i)) {
          arrival = i;
          break;
        }
        u -= model.immigration_rate(i);
      }
      zp[arrival] += 1;
      if (event_log) event_log->push_back({t, arrival, -1});
    }
    total = total_rate();
  }
  return out;
}

}  // namespace mbpi
