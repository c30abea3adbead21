#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mbpi/filter_types.hpp"
#include "mbpi/particle_filter.hpp"
#include "mbpi/rng.hpp"

namespace mbpi {

enum class ParamTransform { identity, logscale };

// Named sampling-scale parameters with their per-coordinate transforms.
struct ParameterVector {
  std::vector<std::string> names;
  std::vector<ParamTransform> transforms;
  Vector values;
};

struct GammaPrior {
  int index = 0;
  double shape = 1.0;
  double scale = 1.0;
};

// Multivariate Gaussian prior over a block of coordinates. When
// on_sampling_scale is set the density is evaluated directly at the sampled
// coordinates (a GP prior on log-scale parameters, say); otherwise it is
// evaluated at the natural-scale values with log-transform Jacobians applied.
struct MvnPrior {
  std::vector<int> indices;
  Vector mean;
  Matrix cov;
  bool on_sampling_scale = true;
};

struct PriorSpec {
  std::vector<ParamTransform> transforms;
  std::vector<GammaPrior> gamma_components;
  std::vector<MvnPrior> mvn_components;
  // Sampling-scale coordinates whose support is truncated at zero.
  std::vector<int> nonnegative;
};

// Exponential-covariance GP kernel on a time grid:
// k(t_m, t_n) = variance * exp(-|t_m - t_n| / length_scale).
Matrix gp_exponential_covariance(const std::vector<double>& times,
                                 double variance, double length_scale);

double log_gamma_pdf(double x, double shape, double scale);

// Log prior density at theta (sampling scale); -inf outside the support.
double log_prior(const Vector& theta, const PriorSpec& prior);

struct MhConfig {
  long steps = 81920;
  long burn_in = 20480;
  long adapt_window = 4096;
  double scale = 0.0;  // <= 0 selects the 2.38^2/dim heuristic
  std::uint64_t seed = 1;
  Vector init;
  double init_proposal_sd = 0.1;
  bool keep_burn_in = false;  // also return the discarded burn-in samples
};

// Post-burn-in output of one Metropolis-Hastings chain.
struct ChainTrace {
  Matrix samples;  // kept x dim, sampling scale
  Vector logliks;
  std::vector<char> accepted;
  // (step, covariance) at every proposal refresh, including the initial one.
  std::vector<std::pair<long, Matrix>> proposal_history;
  Matrix burn_samples;  // burn_in x dim when requested, else empty
  long burn_in = 0;
  double acceptance_rate = 0.0;
  double wall_seconds = 0.0;
};

using LoglikFn = std::function<double(const Vector&)>;

// Adaptive Gaussian random-walk Metropolis-Hastings. During burn-in the
// proposal covariance is refreshed every adapt_window steps to
// scale * (empirical covariance of the last adapt_window samples); after
// burn-in it is frozen. Proposals with -inf posterior are always rejected; an
// engine returning NaN is a hard error.
ChainTrace mh_run(const LoglikFn& loglik, const PriorSpec& prior,
                  const MhConfig& config);

// Effective sample size by Geyer's initial monotone sequence estimator,
// capped at the series length; a constant series has ESS 0.
double ess(const Vector& series);

// Split-R-hat over two or more equal-length chains.
double rhat(const std::vector<Vector>& chains);

// Simulates one path through a schedule one observation step at a time,
// returning the pre-reset state at each step.
std::vector<StateVector> simulate_schedule(const StepSchedule& schedule,
                                           const StateVector& z0,
                                           RandomStream& rng);

struct PosteriorPredictive {
  Matrix observed;  // reps x T, first observation coordinate
};

using ScheduleBuilder =
    std::function<std::pair<StepSchedule, ObservationModel>(const Vector&)>;

// Draws parameter rows from `samples`, simulates the model forward, and
// records the observed series, observation noise included.
PosteriorPredictive posterior_predictive(const ScheduleBuilder& builder,
                                         const Matrix& samples,
                                         const StateSampler& draw_initial,
                                         int t_max, int reps,
                                         RandomStream& rng);

}  // namespace mbpi
