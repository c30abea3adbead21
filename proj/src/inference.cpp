#include "mbpi/inference.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace mbpi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Matrix gp_exponential_covariance(const std::vector<double>& times,
                                 double variance, double length_scale) {
  if (!(variance > 0.0) || !(length_scale > 0.0))
    throw InvalidInputError(
        "gp_exponential_covariance: variance and length scale must be > 0");
  const int n = static_cast<int>(times.size());
  Matrix cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cov(i, j) = variance * std::exp(-std::abs(times[i] - times[j]) /
                                      length_scale);
  return cov;
}

double log_gamma_pdf(double x, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw InvalidInputError("log_gamma_pdf: shape and scale must be > 0");
  if (!(x > 0.0)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) -
         std::lgamma(shape);
}

double log_prior(const Vector& theta, const PriorSpec& prior) {
  if (!prior.transforms.empty() &&
      static_cast<Eigen::Index>(prior.transforms.size()) != theta.size())
    throw DimensionError("log_prior: transform list does not match theta");

  auto transform_of = [&](int i) {
    return prior.transforms.empty() ? ParamTransform::identity
                                    : prior.transforms[i];
  };

  for (int i : prior.nonnegative)
    if (theta[i] < 0.0) return kNegInf;

  double total = 0.0;
  for (const auto& gamma : prior.gamma_components) {
    const double x = theta[gamma.index];
    if (transform_of(gamma.index) == ParamTransform::logscale) {
      // Density of the natural-scale variable plus the exp Jacobian.
      total += log_gamma_pdf(std::exp(x), gamma.shape, gamma.scale) + x;
    } else {
      total += log_gamma_pdf(x, gamma.shape, gamma.scale);
    }
    if (total == kNegInf) return kNegInf;
  }

  for (const auto& mvn : prior.mvn_components) {
    const int k = static_cast<int>(mvn.indices.size());
    Vector v(k);
    double jacobian = 0.0;
    for (int j = 0; j < k; ++j) {
      const int idx = mvn.indices[j];
      if (!mvn.on_sampling_scale &&
          transform_of(idx) == ParamTransform::logscale) {
        v[j] = std::exp(theta[idx]);
        jacobian += theta[idx];
      } else {
        v[j] = theta[idx];
      }
    }
    total += mvn_logpdf(v, mvn.mean, mvn.cov) + jacobian;
  }
  return total;
}

ChainTrace mh_run(const LoglikFn& loglik, const PriorSpec& prior,
                  const MhConfig& config) {
  const Eigen::Index dim = config.init.size();
  if (dim < 1) throw InvalidInputError("mh_run: init must be non-empty");
  if (config.steps <= config.burn_in || config.burn_in < 0)
    throw InvalidInputError("mh_run: require steps > burn_in >= 0");
  if (config.adapt_window < 1)
    throw InvalidInputError("mh_run: adapt_window must be >= 1");

  RandomStream rng(config.seed);
  Vector x = config.init;
  double lp = log_prior(x, prior);
  if (!std::isfinite(lp))
    throw InvalidInputError("mh_run: initial point outside prior support");
  double ll = loglik(x);
  if (std::isnan(ll)) throw NumericalError("mh_run: engine returned NaN");

  const double scale =
      config.scale > 0.0 ? config.scale : 2.38 * 2.38 / static_cast<double>(dim);

  Matrix proposal_chol =
      config.init_proposal_sd * Matrix::Identity(dim, dim);

  ChainTrace trace;
  trace.burn_in = config.burn_in;
  trace.proposal_history.emplace_back(
      0, Matrix(config.init_proposal_sd * config.init_proposal_sd *
                Matrix::Identity(dim, dim)));

  const long kept = config.steps - config.burn_in;
  trace.samples.resize(kept, dim);
  trace.logliks.resize(kept);
  trace.accepted.assign(kept, 0);
  if (config.keep_burn_in) trace.burn_samples.resize(config.burn_in, dim);

  Matrix window(config.adapt_window, dim);
  long accepted_kept = 0;

  const auto start = std::chrono::steady_clock::now();
  for (long step = 1; step <= config.steps; ++step) {
    Vector noise(dim);
    for (Eigen::Index i = 0; i < dim; ++i) noise[i] = rng.normal();
    const Vector proposal = x + proposal_chol * noise;
    const double log_u = std::log(rng.uniform_pos());

    const double lp_prop = log_prior(proposal, prior);
    bool accept = false;
    if (lp_prop != kNegInf) {
      const double ll_prop = loglik(proposal);
      if (std::isnan(ll_prop))
        throw NumericalError("mh_run: engine returned NaN");
      const double delta = (lp_prop + ll_prop) - (lp + ll);
      if (log_u < delta) {
        accept = true;
        x = proposal;
        lp = lp_prop;
        ll = ll_prop;
      }
    }

    window.row((step - 1) % config.adapt_window) = x.transpose();
    if (step <= config.burn_in && step % config.adapt_window == 0) {
      const Vector mean = window.colwise().mean();
      const Matrix centered = window.rowwise() - mean.transpose();
      const Matrix cov = centered.transpose() * centered /
                         static_cast<double>(config.adapt_window - 1);
      const Matrix refreshed = scale * cov;
      try {
        SpdFactor factor(refreshed);
        proposal_chol = factor.lower();
        trace.proposal_history.emplace_back(step, refreshed);
      } catch (const NumericalError&) {
        // Degenerate window (e.g. every proposal rejected); keep the current
        // proposal covariance.
      }
    }

    if (step > config.burn_in) {
      const long row = step - config.burn_in - 1;
      trace.samples.row(row) = x.transpose();
      trace.logliks[row] = ll;
      trace.accepted[row] = accept ? 1 : 0;
      if (accept) ++accepted_kept;
    } else if (config.keep_burn_in) {
      trace.burn_samples.row(step - 1) = x.transpose();
    }
  }
  const auto stop = std::chrono::steady_clock::now();
  trace.wall_seconds = std::chrono::duration<double>(stop - start).count();
  trace.acceptance_rate =
      static_cast<double>(accepted_kept) / static_cast<double>(kept);
  return trace;
}

double ess(const Vector& series) {
  const Eigen::Index n = series.size();
  if (n < 100) throw InvalidInputError("ess: series must have length >= 100");

  const double mean = series.mean();
  const Vector centered = series.array() - mean;
  const double gamma0 = centered.squaredNorm() / static_cast<double>(n);
  if (gamma0 == 0.0) return 0.0;

  auto autocov = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) /
           static_cast<double>(n);
  };

  // Geyer initial monotone sequence: sum paired autocovariances while the
  // pair sums stay positive and non-increasing.
  double pair_sum_total = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    pair_sum_total += pair;
    previous = pair;
  }

  const double tau = 2.0 * pair_sum_total / gamma0 - 1.0;
  if (tau <= 1.0) return static_cast<double>(n);  // negative correlation capped
  return static_cast<double>(n) / tau;
}

double rhat(const std::vector<Vector>& chains) {
  if (chains.size() < 2)
    throw InvalidInputError("rhat: at least two chains required");
  const Eigen::Index len = chains.front().size();
  if (len < 100)
    throw InvalidInputError("rhat: chains must have length >= 100");
  for (const auto& chain : chains)
    if (chain.size() != len)
      throw DimensionError("rhat: chains must have equal length");

  // Split each chain in half.
  const Eigen::Index n = len / 2;
  std::vector<Vector> splits;
  splits.reserve(2 * chains.size());
  for (const auto& chain : chains) {
    splits.push_back(chain.head(n));
    splits.push_back(chain.segment(n, n));
  }
  const int m = static_cast<int>(splits.size());

  Vector means(m), vars(m);
  for (int j = 0; j < m; ++j) {
    means[j] = splits[j].mean();
    vars[j] = (splits[j].array() - means[j]).square().sum() /
              static_cast<double>(n - 1);
  }
  const double grand = means.mean();
  const double between = static_cast<double>(n) *
                         (means.array() - grand).square().sum() /
                         static_cast<double>(m - 1);
  const double within = vars.mean();
  if (within == 0.0)
    return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_hat =
      (static_cast<double>(n - 1) / n) * within + between / static_cast<double>(n);
  return std::sqrt(var_hat / within);
}

std::vector<StateVector> simulate_schedule(const StepSchedule& schedule,
                                           const StateVector& z0,
                                           RandomStream& rng) {
  const std::vector<double> unit_grid{1.0};
  std::vector<StateVector> out;
  out.reserve(schedule.step_count());
  StateVector z = z0;
  for (int t = 1; t <= schedule.step_count(); ++t) {
    const auto& model = schedule.model_at(t);
    for (int c : model.counter_types()) z[c] = 0;
    z = simulate(model, z, unit_grid, rng).front();
    out.push_back(z);
  }
  return out;
}

PosteriorPredictive posterior_predictive(const ScheduleBuilder& builder,
                                         const Matrix& samples,
                                         const StateSampler& draw_initial,
                                         int t_max, int reps,
                                         RandomStream& rng) {
  if (samples.rows() < 1)
    throw InvalidInputError("posterior_predictive: empty sample set");

  PosteriorPredictive out;
  out.observed.resize(reps, t_max);
  for (int rep = 0; rep < reps; ++rep) {
    const Vector theta =
        samples.row(rng.below(samples.rows())).transpose();
    auto [schedule, obs] = builder(theta);
    const Matrix noise_factor = gaussian_sampling_factor(obs.R);
    const StateVector z0 = draw_initial(rng);
    const auto states = simulate_schedule(schedule, z0, rng);
    for (int t = 0; t < t_max; ++t) {
      Vector eps(obs.obs_dim());
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
      const Vector y =
          obs.H * states[t].cast<double>() + noise_factor * eps;
      out.observed(rep, t) = y[0];
    }
  }
  return out;
}

}  // namespace mbpi
