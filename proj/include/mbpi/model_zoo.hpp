#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "mbpi/filter_types.hpp"

namespace mbpi {

// SEIR branching-process parameters. The basic reproduction number
// R0 = beta / lambda is derived, not stored.
struct SeirParams {
  double beta = 0.3;     // infection rate per infectious agent
  double delta = 0.375;  // exposed progression rate
  double lambda = 3.0 / 28.0;  // recovery rate
  double p = 0.75;       // probability an E->I transition is observed

  double r0() const { return beta / lambda; }
};

// Erlang-staged variant: progression through k_exposed exponential E stages
// and k_infectious I stages. Rates are totals; per-stage rates are
// k_exposed * delta and k_infectious * lambda.
struct StagedSeirParams {
  SeirParams base;
  int k_exposed = 8;
  int k_infectious = 8;
};

struct PiecewiseWindow {
  double start_day = 0.0;
  double end_day = 0.0;
  SeirParams params;
};

// Piecewise-constant SEIR over unit-spaced observation days; windows must
// partition [0, observation_days].
struct PiecewiseParams {
  std::vector<PiecewiseWindow> windows;
  int observation_days = 0;
};

// Three-type model (E, I, counter) with the counter incremented on observed
// E->I transitions; H = [0, 0, 1].
std::pair<BranchingModel, ObservationModel> build_seir(const SeirParams& params,
                                                       double obs_variance);

// (k_E + k_I + 1)-type staged model; k_E = k_I = 1 reproduces build_seir.
std::pair<BranchingModel, ObservationModel> build_staged_seir(
    const StagedSeirParams& params, double obs_variance);

// Memoizes moment-operator computations keyed by the window's parameter
// tuple; operator computation dominates piecewise likelihood evaluations.
class PiecewiseOperatorCache {
 public:
  const MomentOperators& get(const SeirParams& params, double step);
  long computed_count() const { return computed_; }

 private:
  std::map<std::array<double, 5>, MomentOperators> cache_;
  long computed_ = 0;
};

// One model and one MomentOperators per window (unit step), expanded to a
// per-day schedule. Passing a cache reuses operators across identical
// windows and repeated evaluations.
StepSchedule build_piecewise(const PiecewiseParams& params,
                             PiecewiseOperatorCache* cache = nullptr);

// Windows of equal length with beta_n = lambda * r_values[n].
PiecewiseParams weekly_windows(const std::vector<double>& r_values,
                               int days_per_window, const SeirParams& base);

}  // namespace mbpi
