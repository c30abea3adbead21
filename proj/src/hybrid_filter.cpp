#include "mbpi/hybrid_filter.hpp"

#include <cmath>
#include <limits>

namespace mbpi {

namespace {
// Substream tag for gaussian-to-particle handover draws; keeps handover
// randomness distinct from the per-particle propagation streams.
constexpr std::uint64_t kHandoverTag = 0x68616e646f766572ULL;
}  // namespace

bool in_gaussian_regime(const Vector& mean, const SwitchPolicy& policy,
                        const std::vector<int>& counter_types) {
  if (!mean.allFinite())
    throw InvalidInputError("in_gaussian_regime: mean must be finite");
  double lowest = std::numeric_limits<double>::infinity();
  std::size_t next_counter = 0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const bool is_counter = next_counter < counter_types.size() &&
                            counter_types[next_counter] == i;
    if (is_counter) ++next_counter;
    if (is_counter && !policy.include_counters) continue;
    lowest = std::min(lowest, mean[i]);
  }
  return lowest >= policy.threshold;
}

ParticleEnsemble particles_from_gaussian(const GaussianBelief& belief, int n,
                                         RandomStream& rng) {
  const Matrix factor = gaussian_sampling_factor(belief.cov);
  ParticleEnsemble ensemble;
  ensemble.particles.reserve(n);
  for (int k = 0; k < n; ++k)
    ensemble.particles.push_back(draw_rounded_censored(belief, factor, rng));
  ensemble.logweights.assign(n, -std::log(static_cast<double>(n)));
  return ensemble;
}

FilterTrace run_hybrid(const StepSchedule& schedule,
                       const ObservationModel& obs, const GaussianBelief& init,
                       const std::vector<Vector>& ys, int n,
                       const SwitchPolicy& policy, std::uint64_t seed,
                       const PfOptions& options) {
  const int t_max = schedule.step_count();
  if (t_max < 1 || static_cast<int>(ys.size()) != t_max)
    throw DimensionError("run_hybrid: series/schedule length mismatch");
  if (n < 2)
    throw InvalidInputError("run_hybrid: at least two particles required");

  const RandomStream base(seed);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  bool gaussian_mode =
      in_gaussian_regime(init.mean, policy, schedule.model_at(1).counter_types());

  GaussianBelief belief;
  ParticleEnsemble ensemble;
  if (gaussian_mode) {
    belief = init;
  } else {
    // Mirror run_pf's initialisation so a particle-only hybrid run matches
    // run_pf with a Gaussian initial sampler exactly.
    const StateSampler sampler = gaussian_state_sampler(init);
    ensemble.particles.reserve(n);
    for (int k = 0; k < n; ++k) {
      RandomStream stream = base.substream(0, k + 1);
      ensemble.particles.push_back(sampler(stream));
    }
    ensemble.logweights.assign(n, -std::log(static_cast<double>(n)));
  }

  FilterTrace trace;
  trace.steps.reserve(t_max);

  for (int t = 1; t <= t_max; ++t) {
    StepRecord record;
    if (gaussian_mode) {
      reset_counters(belief, schedule.model_at(t).counter_types());
      GaussianBelief predicted = predict(belief, schedule.ops_at(t));
      auto [filtered, increment] = update(predicted, ys[t - 1], obs);
      belief = filtered;
      record.engine = Engine::gaussian;
      record.predicted = std::move(predicted);
      record.filtered = belief;
      record.loglik = increment;
      trace.steps.push_back(std::move(record));
      trace.total_loglik += increment;
      if (belief.mean.minCoeff() < 0.0) {
        trace.total_loglik = kNegInf;
        trace.aborted = true;
        trace.abort_step = t;
        trace.abort_reason = "aborted-negative-mean";
        break;
      }
    } else {
      record.engine = Engine::particle;
      record.loglik =
          pf_step(ensemble, schedule.model_at(t), obs, ys[t - 1], seed, t,
                  options, &record.predicted, &record.filtered);
      if (options.keep_ensembles)
        record.particles = std::make_shared<ParticleEnsemble>(ensemble);
      trace.total_loglik += record.loglik;
      belief = record.filtered;
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

    if (t == t_max) break;
    const bool next_gaussian = in_gaussian_regime(
        belief.mean, policy, schedule.model_at(t).counter_types());
    if (next_gaussian && !gaussian_mode) {
      belief = moments_from_particles(ensemble);
      gaussian_mode = true;
    } else if (!next_gaussian && gaussian_mode) {
      RandomStream handover =
          base.substream(static_cast<std::uint64_t>(t), kHandoverTag);
      ensemble = particles_from_gaussian(belief, n, handover);
      gaussian_mode = false;
    }
  }
  return trace;
}

}  // namespace mbpi
