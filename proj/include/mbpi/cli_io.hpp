#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbpi/filter_types.hpp"

namespace mbpi {

// Unit-spaced observation series y_1..y_T.
struct ObservationSeries {
  std::vector<Vector> values;

  int length() const { return static_cast<int>(values.size()); }
  int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
};

// Parses a CSV with header `t,y1[,y2,...]` and strictly increasing unit-spaced
// integer times starting at 1.
ObservationSeries load_series(const std::string& path);

struct ModelSection {
  std::string kind = "seir";  // seir | se8i8r | piecewise-seir
  double beta = 0.3;
  double delta = 0.375;
  double lambda = 3.0 / 28.0;
  double p = 0.75;
  double r0 = -1.0;  // when set (> 0), beta = r0 * lambda
  int k_exposed = 8;
  int k_infectious = 8;
  std::vector<double> r_values;  // piecewise reproduction numbers
  int days_per_window = 7;
  std::vector<std::int64_t> z0;  // empty selects the model default
  // Priors for inferred parameters.
  double prior_shape = 4.4;
  double prior_scale = 0.5;
  double gp_variance = 0.49;
  double gp_length_scale = 136.47;
  std::string init_state = "param";  // param | belief (piecewise only)
  double init_prior_mean = 10.0;
  double init_prior_var = 10.0;
};

struct EngineSection {
  std::string kind = "gaussian";  // gaussian | particle | hybrid
  int particles = 256;
  double threshold = 10.0;
  bool threshold_set = false;  // explicit config value overrides model default
  bool counter_in_min = false;
};

struct ObservationSection {
  double sigma = 1.0;
  // When false, sigma is a standard deviation and R = sigma^2.
  bool sigma_is_variance = false;

  double variance() const { return sigma_is_variance ? sigma : sigma * sigma; }
};

struct McmcSection {
  long steps = 81920;
  long burn_in = 20480;
  long adapt_window = 4096;
  double scale = 0.0;
  std::uint64_t seed = 1;
  int chains = 1;
  double init_proposal_sd = 0.1;
  bool write_samples = true;
};

struct IoSection {
  std::string data;
  std::string out = ".";
};

struct SimulateSection {
  int replicates = 1;
  int horizon = 30;
};

struct RunConfig {
  ModelSection model;
  EngineSection engine;
  ObservationSection observation;
  McmcSection mcmc;
  IoSection io;
  SimulateSection simulate;
  std::string config_text;  // raw JSON, echoed into summaries
};

RunConfig load_config(const std::string& path);

// Effective switching threshold: the configured value, else the model-kind
// default (10 for seir, 10/8 for se8i8r).
double effective_threshold(const RunConfig& config);

// Linear-interpolation empirical quantile (type 7).
double empirical_quantile(std::vector<double> values, double q);

// Subcommands. Each writes its outputs under io.out and returns the process
// exit code (0 success, 4 partial output after a negative-mean abort).
// Configuration and data problems throw ConfigError/ParseError; numerical
// failures throw NumericalError.
int cmd_simulate(const RunConfig& config);
int cmd_filter(const RunConfig& config);
int cmd_infer(const RunConfig& config);

}  // namespace mbpi
