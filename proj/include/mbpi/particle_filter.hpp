#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mbpi/filter_types.hpp"
#include "mbpi/rng.hpp"

namespace mbpi {

enum class ResamplingScheme { multinomial, systematic };

struct PfOptions {
  ResamplingScheme resampling = ResamplingScheme::multinomial;
  // Retain a copy of the post-resampling ensemble in each trace step.
  bool keep_ensembles = false;
};

// Draws an initial state; used to start particle runs from a fixed state or
// from a configured prior.
using StateSampler = std::function<StateVector(RandomStream&)>;

StateSampler fixed_state_sampler(StateVector z0);

// Rounded-and-censored Gaussian draw; shares the sampling path used for
// hybrid handovers so seeded runs agree exactly.
StateVector draw_rounded_censored(const GaussianBelief& belief,
                                  const Matrix& cov_factor, RandomStream& rng);
StateSampler gaussian_state_sampler(const GaussianBelief& belief);

// Factor B with B B^T = cov for sampling; PSD-tolerant.
Matrix gaussian_sampling_factor(const Matrix& cov);

// Mean and covariance of a uniform-weight ensemble, both with denominator n.
// Throws for ensembles with fewer than two particles.
GaussianBelief moments_from_particles(const ParticleEnsemble& ensemble);

// One bootstrap step: counter reset, unit-step propagation through the model
// transition, Gaussian weighting against y, and resampling back to uniform
// weights. Randomness is drawn from substreams keyed on (seed, step,
// particle), so results do not depend on the calling context. Returns the
// loglikelihood increment log( (1/n) sum_k w_k ); if every weight is zero the
// increment is -inf and the ensemble is left unresampled.
double pf_step(ParticleEnsemble& ensemble, const BranchingModel& model,
               const ObservationModel& obs, const Vector& y,
               std::uint64_t seed, int step, const PfOptions& options = {},
               GaussianBelief* predicted = nullptr,
               GaussianBelief* filtered = nullptr);

// Full bootstrap particle filter over a series with n particles.
FilterTrace run_pf(const StepSchedule& schedule, const ObservationModel& obs,
                   const StateSampler& draw_initial,
                   const std::vector<Vector>& ys, int n, std::uint64_t seed,
                   const PfOptions& options = {});

}  // namespace mbpi
