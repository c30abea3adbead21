#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mbpi/branching.hpp"
#include "mbpi/linalg.hpp"

namespace mbpi {

// Mean and covariance of the state conditional on the data seen so far.
struct GaussianBelief {
  Vector mean;
  Matrix cov;

  static GaussianBelief point_mass(const StateVector& z) {
    GaussianBelief belief;
    belief.mean = z.cast<double>();
    belief.cov = Matrix::Zero(z.size(), z.size());
    return belief;
  }
};

// Linear-Gaussian observation layer: y | z ~ N(H z, R).
struct ObservationModel {
  Matrix H;
  Matrix R;

  int obs_dim() const { return static_cast<int>(H.rows()); }
  int state_dim() const { return static_cast<int>(H.cols()); }

  void validate() const {
    if (R.rows() != H.rows() || R.cols() != H.rows())
      throw DimensionError("ObservationModel: R must be d x d");
    if (!H.allFinite() || !R.allFinite())
      throw InvalidInputError("ObservationModel: entries must be finite");
  }
};

// Weighted sample representation of a filtering distribution.
struct ParticleEnsemble {
  std::vector<StateVector> particles;
  std::vector<double> logweights;

  int count() const { return static_cast<int>(particles.size()); }
};

enum class Engine { gaussian, particle };

// Per-step filter output. For particle steps the beliefs hold the
// particle-estimated moments, and `particles` is populated when ensemble
// retention was requested.
struct StepRecord {
  Engine engine = Engine::gaussian;
  GaussianBelief predicted;
  GaussianBelief filtered;
  double loglik = 0.0;
  std::shared_ptr<const ParticleEnsemble> particles;
};

struct FilterTrace {
  std::vector<StepRecord> steps;
  double total_loglik = 0.0;
  bool aborted = false;
  int abort_step = -1;  // 1-based step at which the run stopped
  std::string abort_reason;
};

// Piecewise-constant parameter schedule. Observation step t (1-based) uses
// window window_of_step[t-1]; models and operators are aligned by window.
struct StepSchedule {
  std::vector<BranchingModel> models;
  std::vector<MomentOperators> operators;
  std::vector<int> window_of_step;

  static StepSchedule uniform(BranchingModel model, MomentOperators ops,
                              int steps) {
    StepSchedule schedule;
    schedule.models.push_back(std::move(model));
    schedule.operators.push_back(std::move(ops));
    schedule.window_of_step.assign(steps, 0);
    return schedule;
  }

  int step_count() const { return static_cast<int>(window_of_step.size()); }

  const BranchingModel& model_at(int step) const {
    return models[window_of_step[step - 1]];
  }
  const MomentOperators& ops_at(int step) const {
    return operators[window_of_step[step - 1]];
  }
};

}  // namespace mbpi
