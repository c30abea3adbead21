#include "mbpi/model_zoo.hpp"

#include <cmath>

namespace mbpi {

namespace {

void validate_seir(const SeirParams& params) {
  if (!(params.beta > 0.0) || !(params.delta > 0.0) || !(params.lambda > 0.0))
    throw InvalidInputError("SeirParams: rates must be > 0");
  if (params.p < 0.0 || params.p > 1.0)
    throw InvalidInputError("SeirParams: p must lie in [0, 1]");
}

StateVector unit(int dim, int index, int second = -1) {
  StateVector v = StateVector::Zero(dim);
  v[index] += 1;
  if (second >= 0) v[second] += 1;
  return v;
}

ObservationModel counter_observation(int dim, double obs_variance) {
  ObservationModel obs;
  obs.H = Matrix::Zero(1, dim);
  obs.H(0, dim - 1) = 1.0;
  obs.R = Matrix::Constant(1, 1, obs_variance);
  return obs;
}

}  // namespace

std::pair<BranchingModel, ObservationModel> build_seir(const SeirParams& params,
                                                       double obs_variance) {
  validate_seir(params);
  const double beta = params.beta;
  const double lambda = params.lambda;
  const double omega_i = beta + lambda;

  // Types: 0 = exposed, 1 = infectious, 2 = observation counter.
  std::vector<double> rates{params.delta, omega_i, 0.0};
  std::vector<std::vector<ProgenyOutcome>> progeny(3);
  progeny[0] = {{unit(3, 1), 1.0 - params.p}, {unit(3, 1, 2), params.p}};
  progeny[1] = {{unit(3, 0, 1), beta / omega_i},
                {StateVector::Zero(3), lambda / omega_i}};

  BranchingModel model(std::move(rates), std::move(progeny), {}, {2});
  return {std::move(model), counter_observation(3, obs_variance)};
}

std::pair<BranchingModel, ObservationModel> build_staged_seir(
    const StagedSeirParams& params, double obs_variance) {
  validate_seir(params.base);
  const int ke = params.k_exposed;
  const int ki = params.k_infectious;
  if (ke < 1 || ki < 1)
    throw InvalidInputError("StagedSeirParams: stage counts must be >= 1");

  const int r = ke + ki + 1;
  const int counter = r - 1;
  const double beta = params.base.beta;
  const double stage_delta = params.base.delta * ke;
  const double stage_lambda = params.base.lambda * ki;

  std::vector<double> rates(r, 0.0);
  std::vector<std::vector<ProgenyOutcome>> progeny(r);

  // Exposed stages advance at the per-stage rate; the last advance is the
  // observed E->I transition.
  for (int i = 0; i < ke; ++i) {
    rates[i] = stage_delta;
    const int next = i + 1 < ke ? i + 1 : ke;  // E_{i+1} or I_1
    if (i + 1 < ke) {
      progeny[i] = {{unit(r, next), 1.0}};
    } else {
      progeny[i] = {{unit(r, ke), 1.0 - params.base.p},
                    {unit(r, ke, counter), params.base.p}};
    }
  }

  // Each infectious stage either sparks a new exposure (replacing itself) or
  // advances a stage; the final stage's advance is removal.
  const double omega_i = beta + stage_lambda;
  for (int i = 0; i < ki; ++i) {
    const int self = ke + i;
    rates[self] = omega_i;
    std::vector<ProgenyOutcome> outcomes;
    outcomes.push_back({unit(r, 0, self), beta / omega_i});
    if (i + 1 < ki) {
      outcomes.push_back({unit(r, self + 1), stage_lambda / omega_i});
    } else {
      outcomes.push_back({StateVector::Zero(r), stage_lambda / omega_i});
    }
    progeny[self] = std::move(outcomes);
  }

  BranchingModel model(std::move(rates), std::move(progeny), {}, {counter});
  return {std::move(model), counter_observation(r, obs_variance)};
}

const MomentOperators& PiecewiseOperatorCache::get(const SeirParams& params,
                                                   double step) {
  const std::array<double, 5> key{params.beta, params.delta, params.lambda,
                                  params.p, step};
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    auto [model, obs] = build_seir(params, 1.0);
    it = cache_.emplace(key, compute_moment_operators(model, step)).first;
    ++computed_;
  }
  return it->second;
}

StepSchedule build_piecewise(const PiecewiseParams& params,
                             PiecewiseOperatorCache* cache) {
  if (params.windows.empty() || params.observation_days < 1)
    throw ConfigError("build_piecewise: no windows or no observation days");

  double expected_start = 0.0;
  for (const auto& window : params.windows) {
    if (window.start_day != expected_start)
      throw ConfigError("build_piecewise: windows have a gap or overlap");
    if (!(window.end_day > window.start_day))
      throw ConfigError("build_piecewise: windows must have positive length");
    expected_start = window.end_day;
  }
  if (expected_start != static_cast<double>(params.observation_days))
    throw ConfigError("build_piecewise: windows must partition [0, T]");

  StepSchedule schedule;
  schedule.models.reserve(params.windows.size());
  schedule.operators.reserve(params.windows.size());
  PiecewiseOperatorCache local;
  PiecewiseOperatorCache& ops_cache = cache ? *cache : local;

  for (const auto& window : params.windows) {
    auto [model, obs] = build_seir(window.params, 1.0);
    schedule.models.push_back(std::move(model));
    schedule.operators.push_back(ops_cache.get(window.params, 1.0));
  }

  schedule.window_of_step.resize(params.observation_days);
  int window_index = 0;
  for (int day = 1; day <= params.observation_days; ++day) {
    while (params.windows[window_index].end_day < static_cast<double>(day))
      ++window_index;
    schedule.window_of_step[day - 1] = window_index;
  }
  return schedule;
}

PiecewiseParams weekly_windows(const std::vector<double>& r_values,
                               int days_per_window, const SeirParams& base) {
  PiecewiseParams params;
  params.observation_days =
      days_per_window * static_cast<int>(r_values.size());
  double start = 0.0;
  for (double r : r_values) {
    SeirParams window = base;
    window.beta = base.lambda * r;
    params.windows.push_back(
        {start, start + days_per_window, window});
    start += days_per_window;
  }
  return params;
}

}  // namespace mbpi
