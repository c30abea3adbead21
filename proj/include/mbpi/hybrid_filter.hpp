#pragma once

#include "mbpi/gaussian_filter.hpp"
#include "mbpi/particle_filter.hpp"

namespace mbpi {

// Threshold rule for choosing the Gaussian engine: a step belongs to the
// Gaussian set when the minimum filtered-mean coordinate is at least
// `threshold`. Counter coordinates are excluded from the minimum by default
// since they are reset to zero at every step; include_counters restores the
// literal all-coordinates rule.
struct SwitchPolicy {
  double threshold = 10.0;
  bool include_counters = false;
};

bool in_gaussian_regime(const Vector& mean, const SwitchPolicy& policy,
                        const std::vector<int>& counter_types);

// n rounded-and-censored draws from the belief with uniform weights.
ParticleEnsemble particles_from_gaussian(const GaussianBelief& belief, int n,
                                         RandomStream& rng);

// Per-step switching between the particle and Gaussian engines. The engine
// for step 1 is chosen by evaluating the policy on the initial mean; after
// each step the policy is re-evaluated on the current filtered mean to choose
// the next step's engine, with moment/particle handovers in between. The
// total loglikelihood is the sum of Gaussian increments over the Gaussian
// steps and particle-filter increments elsewhere.
FilterTrace run_hybrid(const StepSchedule& schedule,
                       const ObservationModel& obs, const GaussianBelief& init,
                       const std::vector<Vector>& ys, int n,
                       const SwitchPolicy& policy, std::uint64_t seed,
                       const PfOptions& options = {});

}  // namespace mbpi
