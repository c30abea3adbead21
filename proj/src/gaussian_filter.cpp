#include "mbpi/gaussian_filter.hpp"

#include <cmath>
#include <limits>

namespace mbpi {

namespace {

// Pseudo-inverse of a symmetric PSD matrix, tolerating rank deficiency.
Matrix psd_pinv(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  const Vector& lambda = eig.eigenvalues();
  const double cutoff =
      std::max(lambda.cwiseAbs().maxCoeff(), 1.0) * 1e-13;
  Vector inv = Vector::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] > cutoff) inv[i] = 1.0 / lambda[i];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix repair_cov(const Matrix& cov) {
  Matrix sym = 0.5 * (cov + cov.transpose());
  // Cheap common path: accept the matrix if it factorizes.
  try {
    SpdFactor factor(sym);
    return sym;
  } catch (const NumericalError&) {
    return clamp_psd(sym);
  }
}

}  // namespace

GaussianBelief predict(const GaussianBelief& belief,
                       const MomentOperators& ops) {
  const Eigen::Index r = ops.mean_op.rows();
  if (belief.mean.size() != r ||
      static_cast<Eigen::Index>(ops.var_ops.size()) != r)
    throw DimensionError("predict: dimension mismatch");

  GaussianBelief out;
  out.mean = ops.mean_op.transpose() * belief.mean;
  Matrix cov = ops.mean_op.transpose() * belief.cov * ops.mean_op;
  for (Eigen::Index i = 0; i < r; ++i)
    if (belief.mean[i] != 0.0) cov += belief.mean[i] * ops.var_ops[i];
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

std::pair<GaussianBelief, double> update(const GaussianBelief& belief,
                                         const Vector& y,
                                         const ObservationModel& obs) {
  obs.validate();
  const Eigen::Index r = belief.mean.size();
  const Eigen::Index d = obs.obs_dim();
  if (obs.state_dim() != r || y.size() != d)
    throw DimensionError("update: dimension mismatch");
  if (!y.allFinite())
    throw InvalidInputError("update: observation has non-finite entries");

  const Matrix hcov = obs.H * belief.cov;               // d x r
  Matrix innov_cov = hcov * obs.H.transpose() + obs.R;  // S
  innov_cov = 0.5 * (innov_cov + innov_cov.transpose());

  SpdFactor factor(innov_cov);  // throws NumericalError when S is not PD
  const Matrix gain = factor.solve(hcov).transpose();   // K = cov H^T S^-1
  const Vector innovation = y - obs.H * belief.mean;

  GaussianBelief out;
  out.mean = belief.mean + gain * innovation;

  const Matrix ikh = Matrix::Identity(r, r) - gain * obs.H;
  Matrix cov;
  if ((obs.R.diagonal().array() == 0.0).any()) {
    // Joseph form stays PSD as R approaches singularity.
    cov = ikh * belief.cov * ikh.transpose() +
          gain * obs.R * gain.transpose();
  } else {
    cov = ikh * belief.cov;
  }
  out.cov = repair_cov(cov);

  static const double kLog2Pi = 1.8378770664093454836;
  const double loglik =
      -0.5 * (static_cast<double>(d) * kLog2Pi + factor.logdet() +
              innovation.dot(factor.solve(innovation)));
  return {std::move(out), loglik};
}

void reset_counters(GaussianBelief& belief, const std::vector<int>& counters) {
  for (int c : counters) {
    belief.mean[c] = 0.0;
    belief.cov.row(c).setZero();
    belief.cov.col(c).setZero();
  }
}

FilterTrace run_gaussian_filter(const StepSchedule& schedule,
                                const ObservationModel& obs,
                                const GaussianBelief& init,
                                const std::vector<Vector>& ys) {
  const int t_max = schedule.step_count();
  if (t_max < 1 || static_cast<int>(ys.size()) != t_max)
    throw DimensionError("run_gaussian_filter: series/schedule length mismatch");

  FilterTrace trace;
  trace.steps.reserve(t_max);
  GaussianBelief belief = init;

  for (int t = 1; t <= t_max; ++t) {
    reset_counters(belief, schedule.model_at(t).counter_types());
    GaussianBelief predicted = predict(belief, schedule.ops_at(t));
    auto [filtered, increment] = update(predicted, ys[t - 1], obs);
    belief = filtered;

    StepRecord record;
    record.engine = Engine::gaussian;
    record.predicted = std::move(predicted);
    record.filtered = belief;
    record.loglik = increment;
    trace.steps.push_back(std::move(record));
    trace.total_loglik += increment;

    if (belief.mean.minCoeff() < 0.0) {
      trace.total_loglik = -std::numeric_limits<double>::infinity();
      trace.aborted = true;
      trace.abort_step = t;
      trace.abort_reason = "aborted-negative-mean";
      break;
    }
  }
  return trace;
}

std::vector<GaussianBelief> rts_smooth(const FilterTrace& trace,
                                       const StepSchedule& schedule) {
  const int t_max = static_cast<int>(trace.steps.size());
  if (t_max == 0)
    throw DimensionError("rts_smooth: empty trace");
  for (const auto& step : trace.steps)
    if (step.engine != Engine::gaussian)
      throw UnsupportedOperationError(
          "rts_smooth: trace must be produced entirely by the Gaussian engine");

  std::vector<GaussianBelief> smoothed(t_max);
  smoothed[t_max - 1] = trace.steps[t_max - 1].filtered;

  for (int t = t_max - 1; t >= 1; --t) {
    // Gain for step t (1-based): G = Sigma_{t|t} P F  S_{t+1|t}^{-1}, where P
    // zeroes counter rows of F because those coordinates are reset before the
    // prediction and carry no information forward.
    const auto& filtered = trace.steps[t - 1].filtered;
    const auto& predicted_next = trace.steps[t].predicted;
    Matrix f = schedule.ops_at(t + 1).mean_op;
    for (int c : schedule.model_at(t + 1).counter_types()) f.row(c).setZero();

    const Matrix gain =
        filtered.cov * f * psd_pinv(predicted_next.cov);

    GaussianBelief belief;
    belief.mean = filtered.mean +
                  gain * (smoothed[t].mean - predicted_next.mean);
    Matrix cov = filtered.cov +
                 gain * (smoothed[t].cov - predicted_next.cov) *
                     gain.transpose();
    belief.cov = 0.5 * (cov + cov.transpose());
    smoothed[t - 1] = std::move(belief);
  }
  return smoothed;
}

}  // namespace mbpi
