#pragma once

#include <cstdint>
#include <vector>

#include "mbpi/linalg.hpp"
#include "mbpi/rng.hpp"

namespace mbpi {

// Agent counts by type.
using StateVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// One branching outcome of a death event: offspring counts by type and the
// probability of producing them.
struct ProgenyOutcome {
  StateVector offspring;
  double probability = 0.0;
};

// Continuous-time multitype branching process. An agent of type i lives for
// an Exp(lifetime_rate(i)) time and on death produces offspring drawn from
// progeny(i). Immigration of type i arrives as a Poisson process of rate
// immigration_rate(i). Counter types accumulate observed events, must have a
// zero lifetime rate, and are reset to zero at the start of each observation
// step by the simulator and the filters.
class BranchingModel {
 public:
  BranchingModel(std::vector<double> lifetime_rates,
                 std::vector<std::vector<ProgenyOutcome>> progeny,
                 std::vector<double> immigration_rates = {},
                 std::vector<int> counter_types = {});

  int type_count() const { return static_cast<int>(lifetime_rates_.size()); }
  double lifetime_rate(int i) const { return lifetime_rates_[i]; }
  const std::vector<ProgenyOutcome>& progeny(int i) const {
    return progeny_[i];
  }
  double immigration_rate(int i) const { return immigration_rates_[i]; }
  double total_immigration_rate() const { return total_immigration_; }
  bool has_immigration() const { return total_immigration_ > 0.0; }

  // Sorted 0-based indices of the counter types.
  const std::vector<int>& counter_types() const { return counter_types_; }
  bool is_counter(int i) const { return is_counter_[i] != 0; }

  // Expected number of type-k offspring from the death of a type-i agent.
  double mean_progeny(int i, int k) const;

  // Cumulative progeny probabilities per type, for sampling.
  const std::vector<double>& progeny_cdf(int i) const { return progeny_cdf_[i]; }

 private:
  void validate() const;

  std::vector<double> lifetime_rates_;
  std::vector<std::vector<ProgenyOutcome>> progeny_;
  std::vector<double> immigration_rates_;
  std::vector<int> counter_types_;
  std::vector<char> is_counter_;
  std::vector<std::vector<double>> progeny_cdf_;
  double total_immigration_ = 0.0;
};

// One-step conditional moment maps of the process: mean_op is F with
// E[z_{t+step} | z_t] = z_t F, and var_ops[i] is V_i with
// Var(z_{t+step} | z_t) = sum_i z_{t,i} V_i.
struct MomentOperators {
  Matrix mean_op;
  std::vector<Matrix> var_ops;
  double step = 1.0;
};

// Characteristic matrix: Omega_ik = omega_i * (f_ik - delta_ik). The model
// must not carry immigration; apply augment_immigration first.
Matrix build_omega(const BranchingModel& model);

// Recasts constant Poisson immigration as an (r+1)-th type holding exactly
// one agent that dies at the total immigration rate and replaces itself plus
// one immigrant. Callers must pin the augmented coordinate's initial count
// to 1. Returns the model unchanged when it has no immigration.
BranchingModel augment_immigration(const BranchingModel& model);

// The r^2 x r variance-source matrix C whose i-th column is vec[C_i] with
// C_i = omega_i * sum_j (j - u_i)^T (j - u_i) p_{i,j}.
Matrix build_variance_source(const BranchingModel& model);

// F and V_i over one step of the given length. V_i is read off the
// upper-right r^2 x r quadrant of the block exponential
// exp([[Omega^T (+) Omega^T, C], [0, Omega^T]] * step) where (+) is the
// Kronecker sum; the lower-right quadrant is checked against F^T.
MomentOperators compute_moment_operators(const BranchingModel& model,
                                         double step = 1.0);

// z F as a real vector.
Vector conditional_mean(const StateVector& z, const MomentOperators& ops);

// sum_i z_i V_i, symmetric PSD.
Matrix conditional_var(const StateVector& z, const MomentOperators& ops);

// One simulated event: the dying (or immigrating) type and, for deaths, the
// index of the progeny outcome drawn. progeny_index is -1 for immigration.
struct SimEvent {
  double time;
  int type;
  int progeny_index;
};

// Exact Doob-Gillespie realization recorded at the given sorted grid times.
// Counter coordinates are reset to zero immediately after each grid time is
// recorded, so recorded counter values are per-interval increments. Returned
// states are the pre-reset values.
std::vector<StateVector> simulate(const BranchingModel& model,
                                  const StateVector& z0,
                                  const std::vector<double>& grid,
                                  RandomStream& rng,
                                  std::vector<SimEvent>* event_log = nullptr);

}  // namespace mbpi
