#pragma once

#include <vector>

#include "mbpi/filter_types.hpp"

namespace mbpi {

// Moment-propagation prediction: mean' = mean F and
// cov' = sum_i mean_i V_i + F^T cov F, symmetrized.
GaussianBelief predict(const GaussianBelief& belief,
                       const MomentOperators& ops);

// Kalman update against one observation. Returns the filtered belief and the
// loglikelihood increment log N(y; H mean, H cov H^T + R). Uses the Joseph
// form when R has a zero diagonal entry; covariance is repaired by eigenvalue
// clamping only when a Cholesky attempt fails.
std::pair<GaussianBelief, double> update(const GaussianBelief& belief,
                                         const Vector& y,
                                         const ObservationModel& obs);

// Zeroes the counter coordinates of the belief: mean entry and covariance
// row/column. Applied at the start of each observation step.
void reset_counters(GaussianBelief& belief, const std::vector<int>& counters);

// Full Gaussian filtering pass over a series. If any filtered mean coordinate
// goes negative the run stops with total loglikelihood -inf.
FilterTrace run_gaussian_filter(const StepSchedule& schedule,
                                const ObservationModel& obs,
                                const GaussianBelief& init,
                                const std::vector<Vector>& ys);

// Fixed-interval smoothing of a Gaussian-only trace; returns one belief per
// observation step. Mixed-engine traces are not supported.
std::vector<GaussianBelief> rts_smooth(const FilterTrace& trace,
                                       const StepSchedule& schedule);

}  // namespace mbpi
