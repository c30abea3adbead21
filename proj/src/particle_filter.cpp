#include "mbpi/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbpi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gaussian observation density that tolerates a singular R: directions with
// zero noise require an exact match, remaining directions contribute the
// usual quadratic form with the pseudo-determinant.
class ObsDensity {
 public:
  explicit ObsDensity(const Matrix& noise_cov) {
    const Matrix sym = 0.5 * (noise_cov + noise_cov.transpose());
    try {
      factor_ = std::make_unique<SpdFactor>(sym);
      return;
    } catch (const NumericalError&) {
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
      throw NumericalError("ObsDensity: R is not positive semidefinite");
    vectors_ = eig.eigenvectors();
    values_ = eig.eigenvalues().cwiseMax(0.0);
    cutoff_ = scale * 1e-12;
  }

  double logpdf(const Vector& residual) const {
    static const double kLog2Pi = 1.8378770664093454836;
    if (factor_) {
      return -0.5 * (static_cast<double>(residual.size()) * kLog2Pi +
                     factor_->logdet() +
                     residual.dot(factor_->solve(residual)));
    }
    const Vector proj = vectors_.transpose() * residual;
    double quad = 0.0, logdet = 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (values_[i] > cutoff_) {
        quad += proj[i] * proj[i] / values_[i];
        logdet += std::log(values_[i]);
        ++rank;
      } else if (std::abs(proj[i]) > 1e-9) {
        return kNegInf;  // zero-noise direction with a mismatch
      }
    }
    return -0.5 * (rank * kLog2Pi + logdet + quad);
  }

 private:
  std::unique_ptr<SpdFactor> factor_;
  Matrix vectors_;
  Vector values_;
  double cutoff_ = 0.0;
};

GaussianBelief uniform_ensemble_moments(const ParticleEnsemble& ensemble) {
  if (ensemble.count() >= 2) return moments_from_particles(ensemble);
  GaussianBelief belief;
  belief.mean = ensemble.particles[0].cast<double>();
  belief.cov = Matrix::Zero(belief.mean.size(), belief.mean.size());
  return belief;
}

void resample(ParticleEnsemble& ensemble, const std::vector<double>& logw,
              double max_logw, ResamplingScheme scheme, RandomStream& rng) {
  const int n = ensemble.count();
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    total += std::exp(logw[k] - max_logw);
    cumulative[k] = total;
  }

  std::vector<StateVector> resampled;
  resampled.reserve(n);
  auto pick = [&](double u) {
    const double target = u * total;
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), target);
    const auto idx = std::min<std::ptrdiff_t>(it - cumulative.begin(), n - 1);
    resampled.push_back(ensemble.particles[idx]);
  };

  if (scheme == ResamplingScheme::multinomial) {
    for (int k = 0; k < n; ++k) pick(rng.uniform());
  } else {
    const double offset = rng.uniform();
    for (int k = 0; k < n; ++k) pick((offset + k) / n);
  }
  ensemble.particles = std::move(resampled);
  ensemble.logweights.assign(n, -std::log(static_cast<double>(n)));
}

}  // namespace

StateSampler fixed_state_sampler(StateVector z0) {
  return [z0 = std::move(z0)](RandomStream&) { return z0; };
}

Matrix gaussian_sampling_factor(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericalError("gaussian_sampling_factor: eigendecomposition failed");
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-8 * scale)
    throw NumericalError(
        "gaussian_sampling_factor: covariance is not positive semidefinite");
  const Vector sqrt_vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * sqrt_vals.asDiagonal();
}

StateVector draw_rounded_censored(const GaussianBelief& belief,
                                  const Matrix& cov_factor, RandomStream& rng) {
  const Eigen::Index r = belief.mean.size();
  Vector z(r);
  for (Eigen::Index i = 0; i < r; ++i) z[i] = rng.normal();
  const Vector draw = belief.mean + cov_factor * z;
  StateVector state(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double rounded = std::round(draw[i]);
    state[i] = rounded < 0.0 ? 0 : static_cast<std::int64_t>(rounded);
  }
  return state;
}

StateSampler gaussian_state_sampler(const GaussianBelief& belief) {
  Matrix factor = gaussian_sampling_factor(belief.cov);
  return [belief, factor = std::move(factor)](RandomStream& rng) {
    return draw_rounded_censored(belief, factor, rng);
  };
}

GaussianBelief moments_from_particles(const ParticleEnsemble& ensemble) {
  const int n = ensemble.count();
  if (n < 2)
    throw InvalidInputError(
        "moments_from_particles: at least two particles required");
  const Eigen::Index r = ensemble.particles[0].size();

  GaussianBelief belief;
  belief.mean = Vector::Zero(r);
  for (const auto& particle : ensemble.particles)
    belief.mean += particle.cast<double>();
  belief.mean /= static_cast<double>(n);

  belief.cov = Matrix::Zero(r, r);
  for (const auto& particle : ensemble.particles) {
    const Vector diff = particle.cast<double>() - belief.mean;
    belief.cov.noalias() += diff * diff.transpose();
  }
  belief.cov /= static_cast<double>(n);
  return belief;
}

double pf_step(ParticleEnsemble& ensemble, const BranchingModel& model,
               const ObservationModel& obs, const Vector& y,
               std::uint64_t seed, int step, const PfOptions& options,
               GaussianBelief* predicted, GaussianBelief* filtered) {
  obs.validate();
  const int n = ensemble.count();
  if (n < 1) throw InvalidInputError("pf_step: empty ensemble");
  if (!y.allFinite())
    throw InvalidInputError("pf_step: observation has non-finite entries");

  const RandomStream base(seed);
  const std::vector<double> unit_grid{1.0};

  for (int k = 0; k < n; ++k) {
    StateVector& particle = ensemble.particles[k];
    for (int c : model.counter_types()) particle[c] = 0;
    RandomStream stream =
        base.substream(static_cast<std::uint64_t>(step), k + 1);
    particle = simulate(model, particle, unit_grid, stream).front();
  }
  if (predicted) *predicted = uniform_ensemble_moments(ensemble);

  const ObsDensity density(obs.R);
  std::vector<double> logw(n);
  double max_logw = kNegInf;
  for (int k = 0; k < n; ++k) {
    const Vector residual =
        y - obs.H * ensemble.particles[k].cast<double>();
    logw[k] = density.logpdf(residual);
    max_logw = std::max(max_logw, logw[k]);
  }

  if (max_logw == kNegInf) {
    // Every particle has zero weight; leave the ensemble unresampled.
    if (filtered) *filtered = uniform_ensemble_moments(ensemble);
    return kNegInf;
  }

  double sumexp = 0.0;
  for (int k = 0; k < n; ++k) sumexp += std::exp(logw[k] - max_logw);
  const double increment =
      max_logw + std::log(sumexp) - std::log(static_cast<double>(n));

  RandomStream resample_stream =
      base.substream(static_cast<std::uint64_t>(step), 0);
  resample(ensemble, logw, max_logw, options.resampling, resample_stream);
  if (filtered) *filtered = uniform_ensemble_moments(ensemble);
  return increment;
}

FilterTrace run_pf(const StepSchedule& schedule, const ObservationModel& obs,
                   const StateSampler& draw_initial,
                   const std::vector<Vector>& ys, int n, std::uint64_t seed,
                   const PfOptions& options) {
  const int t_max = schedule.step_count();
  if (t_max < 1 || static_cast<int>(ys.size()) != t_max)
    throw DimensionError("run_pf: series/schedule length mismatch");
  if (n < 2) throw InvalidInputError("run_pf: at least two particles required");

  const RandomStream base(seed);
  ParticleEnsemble ensemble;
  ensemble.particles.reserve(n);
  for (int k = 0; k < n; ++k) {
    RandomStream stream = base.substream(0, k + 1);
    ensemble.particles.push_back(draw_initial(stream));
  }
  ensemble.logweights.assign(n, -std::log(static_cast<double>(n)));

  FilterTrace trace;
  trace.steps.reserve(t_max);
  for (int t = 1; t <= t_max; ++t) {
    StepRecord record;
    record.engine = Engine::particle;
    record.loglik =
        pf_step(ensemble, schedule.model_at(t), obs, ys[t - 1], seed, t,
                options, &record.predicted, &record.filtered);
    if (options.keep_ensembles)
      record.particles = std::make_shared<ParticleEnsemble>(ensemble);
    trace.total_loglik += record.loglik;
    const bool dead = record.loglik == kNegInf;
    trace.steps.push_back(std::move(record));
    if (dead) {
      trace.total_loglik = kNegInf;
      trace.aborted = true;
      trace.abort_step = t;
      trace.abort_reason = "aborted-zero-weights";
      break;
    }
  }
  return trace;
}

}  // namespace mbpi
