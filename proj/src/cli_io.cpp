#include "mbpi/cli_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <memory>
#include <sstream>

#include "mbpi/gaussian_filter.hpp"
#include "mbpi/hybrid_filter.hpp"
#include "mbpi/inference.hpp"
#include "mbpi/model_zoo.hpp"
#include "mbpi/particle_filter.hpp"

namespace mbpi {

namespace {

using nlohmann::json;

// Locale-independent shortest round-trip representation.
std::string fmt(double v) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  out.imbue(std::locale::classic());
  return out;
}

// ---- configuration -------------------------------------------------------

template <typename T>
void read_field(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void validate_config(const RunConfig& config) {
  const auto& kind = config.model.kind;
  if (kind != "seir" && kind != "se8i8r" && kind != "piecewise-seir")
    throw ConfigError("model.kind must be seir, se8i8r or piecewise-seir");
  const auto& engine = config.engine.kind;
  if (engine != "gaussian" && engine != "particle" && engine != "hybrid")
    throw ConfigError("engine.kind must be gaussian, particle or hybrid");
  if (config.engine.particles < 2)
    throw ConfigError("engine.particles must be >= 2");
  if (config.engine.threshold < 0.0)
    throw ConfigError("engine.threshold must be >= 0");
  if (config.model.p < 0.0 || config.model.p > 1.0)
    throw ConfigError("model.p must lie in [0, 1]");
  if (config.observation.sigma < 0.0)
    throw ConfigError("observation.sigma must be >= 0");
  if (config.mcmc.steps <= config.mcmc.burn_in)
    throw ConfigError("mcmc.steps must exceed mcmc.burn_in");
  if (config.mcmc.chains < 1) throw ConfigError("mcmc.chains must be >= 1");
  if (config.simulate.replicates < 1 || config.simulate.horizon < 1)
    throw ConfigError("simulate.replicates and simulate.horizon must be >= 1");
  if (config.model.kind == "piecewise-seir" &&
      config.model.init_state != "param" && config.model.init_state != "belief")
    throw ConfigError("model.init_state must be param or belief");
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  RunConfig config;
  config.config_text = buffer.str();

  json root;
  try {
    root = json::parse(config.config_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  try {
    if (root.contains("model")) {
      const auto& m = root.at("model");
      read_field(m, "kind", config.model.kind);
      read_field(m, "beta", config.model.beta);
      read_field(m, "delta", config.model.delta);
      read_field(m, "lambda", config.model.lambda);
      read_field(m, "p", config.model.p);
      read_field(m, "r0", config.model.r0);
      read_field(m, "kE", config.model.k_exposed);
      read_field(m, "kI", config.model.k_infectious);
      read_field(m, "r_values", config.model.r_values);
      read_field(m, "days_per_window", config.model.days_per_window);
      read_field(m, "z0", config.model.z0);
      read_field(m, "prior_shape", config.model.prior_shape);
      read_field(m, "prior_scale", config.model.prior_scale);
      read_field(m, "gp_variance", config.model.gp_variance);
      read_field(m, "gp_length_scale", config.model.gp_length_scale);
      read_field(m, "init_state", config.model.init_state);
      read_field(m, "init_prior_mean", config.model.init_prior_mean);
      read_field(m, "init_prior_var", config.model.init_prior_var);
    }
    if (root.contains("engine")) {
      const auto& e = root.at("engine");
      read_field(e, "kind", config.engine.kind);
      read_field(e, "particles", config.engine.particles);
      if (e.contains("threshold")) {
        config.engine.threshold = e.at("threshold").get<double>();
        config.engine.threshold_set = true;
      }
      read_field(e, "counter_in_min", config.engine.counter_in_min);
    }
    if (root.contains("observation")) {
      const auto& o = root.at("observation");
      read_field(o, "sigma", config.observation.sigma);
      read_field(o, "sigma_is_variance", config.observation.sigma_is_variance);
      read_field(o, "p", config.model.p);
    }
    if (root.contains("mcmc")) {
      const auto& m = root.at("mcmc");
      read_field(m, "steps", config.mcmc.steps);
      read_field(m, "burn_in", config.mcmc.burn_in);
      read_field(m, "adapt_window", config.mcmc.adapt_window);
      read_field(m, "scale", config.mcmc.scale);
      read_field(m, "seed", config.mcmc.seed);
      read_field(m, "chains", config.mcmc.chains);
      read_field(m, "init_proposal_sd", config.mcmc.init_proposal_sd);
      read_field(m, "write_samples", config.mcmc.write_samples);
    }
    if (root.contains("io")) {
      const auto& io = root.at("io");
      read_field(io, "data", config.io.data);
      read_field(io, "out", config.io.out);
    }
    if (root.contains("simulate")) {
      const auto& s = root.at("simulate");
      read_field(s, "replicates", config.simulate.replicates);
      read_field(s, "horizon", config.simulate.horizon);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has wrong type: ") + e.what());
  }

  validate_config(config);
  return config;
}

double effective_threshold(const RunConfig& config) {
  if (config.engine.threshold_set) return config.engine.threshold;
  if (config.model.kind == "se8i8r") return 10.0 / 8.0;
  return 10.0;
}

ObservationSeries load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("data file not found: " + path);
  in.imbue(std::locale::classic());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty series", 1);
  // Header: t,y1[,y2,...]
  {
    std::stringstream header(line);
    std::string field;
    if (!std::getline(header, field, ',') || field != "t")
      throw ParseError("header must start with column 't'", 1);
  }

  ObservationSeries series;
  long line_number = 1;
  long expected_t = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::vector<double> values;
    bool first = true;
    long t = 0;
    while (std::getline(row, field, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        if (first) {
          t = static_cast<long>(v);
          if (static_cast<double>(t) != v)
            throw ParseError("time column must be integer", line_number);
          first = false;
        } else {
          if (!std::isfinite(v))
            throw ParseError("observation must be finite", line_number);
          values.push_back(v);
        }
      } catch (const std::invalid_argument&) {
        throw ParseError("malformed numeric field '" + field + "'",
                         line_number);
      } catch (const std::out_of_range&) {
        throw ParseError("numeric field out of range", line_number);
      }
    }
    if (values.empty())
      throw ParseError("row has no observation columns", line_number);
    if (t != expected_t)
      throw ParseError("times must be unit-spaced starting at 1 (expected " +
                           std::to_string(expected_t) + ")",
                       line_number);
    if (!series.values.empty() &&
        static_cast<int>(values.size()) != series.dim())
      throw ParseError("inconsistent observation dimension", line_number);
    Vector y(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) y[i] = values[i];
    series.values.push_back(std::move(y));
    ++expected_t;
  }
  if (series.values.empty()) throw ParseError("empty series", 1);
  return series;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty())
    throw InvalidInputError("empirical_quantile: empty sample");
  std::sort(values.begin(), values.end());
  if (q <= 0.0) return values.front();
  if (q >= 1.0) return values.back();
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = h - std::floor(h);
  return (1.0 - w) * values[lo] + w * values[hi];
}

namespace {

// ---- model assembly ------------------------------------------------------

StateVector default_z0(const RunConfig& config, int type_count) {
  if (!config.model.z0.empty()) {
    if (static_cast<int>(config.model.z0.size()) != type_count)
      throw ConfigError("model.z0 has the wrong length");
    StateVector z(type_count);
    for (int i = 0; i < type_count; ++i) z[i] = config.model.z0[i];
    if ((z.array() < 0).any()) throw ConfigError("model.z0 must be >= 0");
    return z;
  }
  StateVector z = StateVector::Zero(type_count);
  if (config.model.kind == "seir" || config.model.kind == "piecewise-seir") {
    z[0] = 6;
  } else {
    // Six exposed agents spread over the first stages.
    const int spread = std::min(6, config.model.k_exposed);
    for (int i = 0; i < spread; ++i) z[i] = 1;
    z[0] += 6 - spread;
  }
  return z;
}

SeirParams seir_params(const RunConfig& config) {
  SeirParams params;
  params.beta = config.model.r0 > 0.0 ? config.model.r0 * config.model.lambda
                                      : config.model.beta;
  params.delta = config.model.delta;
  params.lambda = config.model.lambda;
  params.p = config.model.p;
  return params;
}

int model_type_count(const RunConfig& config) {
  return config.model.kind == "se8i8r"
             ? config.model.k_exposed + config.model.k_infectious + 1
             : 3;
}

ObservationModel observation_for(const RunConfig& config) {
  const int r = model_type_count(config);
  ObservationModel obs;
  obs.H = Matrix::Zero(1, r);
  obs.H(0, r - 1) = 1.0;
  obs.R = Matrix::Constant(1, 1, config.observation.variance());
  return obs;
}

// Fixed-parameter schedule for simulate/filter runs.
std::pair<StepSchedule, ObservationModel> fixed_schedule(const RunConfig& config,
                                                         int steps) {
  const double variance = config.observation.variance();
  if (config.model.kind == "seir") {
    auto [model, obs] = build_seir(seir_params(config), variance);
    auto ops = compute_moment_operators(model);
    return {StepSchedule::uniform(std::move(model), std::move(ops), steps),
            std::move(obs)};
  }
  if (config.model.kind == "se8i8r") {
    StagedSeirParams staged;
    staged.base = seir_params(config);
    staged.k_exposed = config.model.k_exposed;
    staged.k_infectious = config.model.k_infectious;
    auto [model, obs] = build_staged_seir(staged, variance);
    auto ops = compute_moment_operators(model);
    return {StepSchedule::uniform(std::move(model), std::move(ops), steps),
            std::move(obs)};
  }
  // piecewise-seir with fixed configured reproduction numbers
  if (config.model.r_values.empty())
    throw ConfigError("piecewise-seir requires model.r_values for fixed runs");
  const auto params = weekly_windows(config.model.r_values,
                                     config.model.days_per_window,
                                     seir_params(config));
  if (params.observation_days != steps)
    throw ConfigError("piecewise windows cover " +
                      std::to_string(params.observation_days) +
                      " days but the run needs " + std::to_string(steps));
  StepSchedule schedule = build_piecewise(params);
  return {std::move(schedule), observation_for(config)};
}

// ---- inference wiring ----------------------------------------------------

struct InferenceSetup {
  std::vector<std::string> names;
  std::vector<ParamTransform> transforms;
  PriorSpec prior;
  Vector init;
  // theta -> per-evaluation schedule (fresh operator cache each call)
  std::function<StepSchedule(const Vector&)> schedule;
  std::function<GaussianBelief(const Vector&)> init_belief;
  std::function<StateSampler(const Vector&)> z0_sampler;
};

InferenceSetup make_setup(const RunConfig& config, int data_length) {
  InferenceSetup setup;

  if (config.model.kind == "piecewise-seir") {
    const int window_days = config.model.days_per_window;
    if (window_days < 1 || data_length % window_days != 0)
      throw ConfigError("data length must be a multiple of days_per_window");
    const int n_windows = data_length / window_days;
    const bool infer_init = config.model.init_state == "param";
    const int dim = n_windows + (infer_init ? 2 : 0);

    setup.transforms.assign(dim, ParamTransform::logscale);
    std::vector<double> times;
    std::vector<int> gp_indices;
    for (int i = 0; i < n_windows; ++i) {
      setup.names.push_back("R" + std::to_string(i + 1));
      times.push_back(static_cast<double>(window_days * i));
      gp_indices.push_back(i);
    }
    MvnPrior gp;
    gp.indices = gp_indices;
    gp.mean = Vector::Zero(n_windows);
    gp.cov = gp_exponential_covariance(times, config.model.gp_variance,
                                       config.model.gp_length_scale);
    gp.on_sampling_scale = true;
    setup.prior.mvn_components.push_back(std::move(gp));

    setup.init = Vector::Zero(dim);
    if (infer_init) {
      setup.names.push_back("E0");
      setup.names.push_back("I0");
      setup.transforms[n_windows] = ParamTransform::identity;
      setup.transforms[n_windows + 1] = ParamTransform::identity;
      MvnPrior init_prior;
      init_prior.indices = {n_windows, n_windows + 1};
      init_prior.mean = Vector::Constant(2, config.model.init_prior_mean);
      init_prior.cov = config.model.init_prior_var * Matrix::Identity(2, 2);
      init_prior.on_sampling_scale = true;
      setup.prior.mvn_components.push_back(std::move(init_prior));
      setup.prior.nonnegative = {n_windows, n_windows + 1};
      setup.init[n_windows] = config.model.init_prior_mean;
      setup.init[n_windows + 1] = config.model.init_prior_mean;
    }
    setup.prior.transforms = setup.transforms;

    const SeirParams base = seir_params(config);
    auto windows_of = [n_windows, window_days, base](const Vector& theta) {
      std::vector<double> r_values(n_windows);
      for (int i = 0; i < n_windows; ++i) r_values[i] = std::exp(theta[i]);
      return weekly_windows(r_values, window_days, base);
    };
    setup.schedule = [windows_of](const Vector& theta) {
      PiecewiseOperatorCache cache;
      return build_piecewise(windows_of(theta), &cache);
    };

    const double prior_mean = config.model.init_prior_mean;
    const double prior_var = config.model.init_prior_var;
    if (infer_init) {
      const int e_idx = n_windows, i_idx = n_windows + 1;
      setup.init_belief = [e_idx, i_idx](const Vector& theta) {
        GaussianBelief belief;
        belief.mean = Vector::Zero(3);
        belief.mean[0] = theta[e_idx];
        belief.mean[1] = theta[i_idx];
        belief.cov = Matrix::Zero(3, 3);
        return belief;
      };
      setup.z0_sampler = [e_idx, i_idx](const Vector& theta) {
        StateVector z0(3);
        z0[0] = static_cast<std::int64_t>(std::max(0.0, std::round(theta[e_idx])));
        z0[1] = static_cast<std::int64_t>(std::max(0.0, std::round(theta[i_idx])));
        z0[2] = 0;
        return fixed_state_sampler(std::move(z0));
      };
    } else {
      setup.init_belief = [prior_mean, prior_var](const Vector&) {
        GaussianBelief belief;
        belief.mean = Vector::Zero(3);
        belief.mean[0] = prior_mean;
        belief.mean[1] = prior_mean;
        belief.cov = Matrix::Zero(3, 3);
        belief.cov(0, 0) = prior_var;
        belief.cov(1, 1) = prior_var;
        return belief;
      };
      setup.z0_sampler = [prior_mean, prior_var](const Vector&) {
        GaussianBelief belief;
        belief.mean = Vector::Zero(3);
        belief.mean[0] = prior_mean;
        belief.mean[1] = prior_mean;
        belief.cov = Matrix::Zero(3, 3);
        belief.cov(0, 0) = prior_var;
        belief.cov(1, 1) = prior_var;
        return gaussian_state_sampler(belief);
      };
    }
    return setup;
  }

  // Single-parameter R0 inference for seir/se8i8r.
  setup.names = {"R0"};
  setup.transforms = {ParamTransform::identity};
  setup.prior.transforms = setup.transforms;
  setup.prior.gamma_components.push_back(
      {0, config.model.prior_shape, config.model.prior_scale});
  setup.init = Vector::Constant(1, config.model.prior_shape *
                                       config.model.prior_scale);

  const RunConfig captured = config;
  const int steps = data_length;
  setup.schedule = [captured, steps](const Vector& theta) {
    RunConfig local = captured;
    local.model.r0 = theta[0];
    return fixed_schedule(local, steps).first;
  };
  const int type_count = config.model.kind == "seir"
                             ? 3
                             : config.model.k_exposed +
                                   config.model.k_infectious + 1;
  const StateVector z0 = default_z0(config, type_count);
  setup.init_belief = [z0](const Vector&) {
    return GaussianBelief::point_mass(z0);
  };
  setup.z0_sampler = [z0](const Vector&) { return fixed_state_sampler(z0); };
  return setup;
}

LoglikFn make_loglik(const RunConfig& config, const InferenceSetup& setup,
                     const ObservationModel& obs,
                     const std::vector<Vector>& data, std::uint64_t seed) {
  if (config.engine.kind == "gaussian") {
    return [&setup, obs, data](const Vector& theta) {
      const StepSchedule schedule = setup.schedule(theta);
      return run_gaussian_filter(schedule, obs, setup.init_belief(theta), data)
          .total_loglik;
    };
  }
  if (config.engine.kind == "particle") {
    const int n = config.engine.particles;
    auto stream = std::make_shared<RandomStream>(seed);
    return [&setup, obs, data, n, stream](const Vector& theta) {
      const StepSchedule schedule = setup.schedule(theta);
      return run_pf(schedule, obs, setup.z0_sampler(theta), data, n,
                    stream->next_u64())
          .total_loglik;
    };
  }
  SwitchPolicy policy;
  policy.threshold = effective_threshold(config);
  policy.include_counters = config.engine.counter_in_min;
  const int n = config.engine.particles;
  auto stream = std::make_shared<RandomStream>(seed);
  return [&setup, obs, data, n, policy, stream](const Vector& theta) {
    const StepSchedule schedule = setup.schedule(theta);
    return run_hybrid(schedule, obs, setup.init_belief(theta), data, n, policy,
                      stream->next_u64())
        .total_loglik;
  };
}

// ---- commands ------------------------------------------------------------

void write_header(std::ofstream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i)
    out << (i ? "," : "") << cols[i];
  out << "\n";
}

}  // namespace

int cmd_simulate(const RunConfig& config) {
  const int horizon = config.simulate.horizon;
  auto [schedule, obs] = fixed_schedule(config, horizon);
  const int r = schedule.models.front().type_count();
  const StateVector z0 = default_z0(config, r);
  const Matrix noise_factor = gaussian_sampling_factor(obs.R);

  auto states_out = open_output(config.io.out, "sim_states.csv");
  auto obs_out = open_output(config.io.out, "sim_obs.csv");
  {
    std::vector<std::string> cols{"rep", "t"};
    for (int i = 1; i <= r; ++i) cols.push_back("z" + std::to_string(i));
    write_header(states_out, cols);
  }
  {
    std::vector<std::string> cols{"rep", "t"};
    for (int i = 1; i <= obs.obs_dim(); ++i)
      cols.push_back("y" + std::to_string(i));
    write_header(obs_out, cols);
  }

  const RandomStream base(config.mcmc.seed);
  for (int rep = 1; rep <= config.simulate.replicates; ++rep) {
    RandomStream rng = base.substream(rep);
    const auto states = simulate_schedule(schedule, z0, rng);
    for (int t = 1; t <= horizon; ++t) {
      const StateVector& z = states[t - 1];
      states_out << rep << "," << t;
      for (int i = 0; i < r; ++i) states_out << "," << z[i];
      states_out << "\n";

      Vector eps(obs.obs_dim());
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
      const Vector y = obs.H * z.cast<double>() + noise_factor * eps;
      obs_out << rep << "," << t;
      for (Eigen::Index i = 0; i < y.size(); ++i) obs_out << "," << fmt(y[i]);
      obs_out << "\n";
    }
  }
  return 0;
}

int cmd_filter(const RunConfig& config) {
  if (config.io.data.empty()) throw ConfigError("io.data is required");
  const ObservationSeries series = load_series(config.io.data);
  auto [schedule, obs] = fixed_schedule(config, series.length());
  const int r = schedule.models.front().type_count();
  const StateVector z0 = default_z0(config, r);
  const GaussianBelief init = GaussianBelief::point_mass(z0);

  PfOptions options;
  options.keep_ensembles = true;

  FilterTrace trace;
  if (config.engine.kind == "gaussian") {
    trace = run_gaussian_filter(schedule, obs, init, series.values);
  } else if (config.engine.kind == "particle") {
    trace = run_pf(schedule, obs, fixed_state_sampler(z0), series.values,
                   config.engine.particles, config.mcmc.seed, options);
  } else {
    SwitchPolicy policy;
    policy.threshold = effective_threshold(config);
    policy.include_counters = config.engine.counter_in_min;
    trace = run_hybrid(schedule, obs, init, series.values,
                       config.engine.particles, policy, config.mcmc.seed,
                       options);
  }

  auto out = open_output(config.io.out, "filter.csv");
  std::vector<std::string> cols{"t", "engine"};
  for (int i = 1; i <= r; ++i) {
    cols.push_back("z" + std::to_string(i) + "_q10");
    cols.push_back("z" + std::to_string(i) + "_med");
    cols.push_back("z" + std::to_string(i) + "_q90");
  }
  cols.push_back("loglik");
  write_header(out, cols);

  const double q10 = std_normal_quantile(0.10);
  const double q90 = std_normal_quantile(0.90);
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const StepRecord& step = trace.steps[t];
    out << (t + 1) << ","
        << (step.engine == Engine::gaussian ? "gaussian" : "particle");
    for (int i = 0; i < r; ++i) {
      double lo, med, hi;
      if (step.engine == Engine::gaussian || !step.particles) {
        const double mu = step.filtered.mean[i];
        const double sd = std::sqrt(std::max(0.0, step.filtered.cov(i, i)));
        lo = mu + sd * q10;
        med = mu;
        hi = mu + sd * q90;
      } else {
        std::vector<double> coords;
        coords.reserve(step.particles->count());
        for (const auto& particle : step.particles->particles)
          coords.push_back(static_cast<double>(particle[i]));
        lo = empirical_quantile(coords, 0.10);
        med = empirical_quantile(coords, 0.50);
        hi = empirical_quantile(coords, 0.90);
      }
      out << "," << fmt(lo) << "," << fmt(med) << "," << fmt(hi);
    }
    out << "," << fmt(step.loglik) << "\n";
  }
  out << "total," << (trace.aborted ? trace.abort_reason : "ok");
  for (int i = 0; i < 3 * r; ++i) out << ",";
  out << "," << fmt(trace.total_loglik) << "\n";

  if (trace.aborted)
    return trace.abort_reason == "aborted-negative-mean" ? 4 : 3;
  return 0;
}

int cmd_infer(const RunConfig& config) {
  if (config.io.data.empty()) throw ConfigError("io.data is required");
  const ObservationSeries series = load_series(config.io.data);

  const ObservationModel obs = observation_for(config);
  const InferenceSetup setup = make_setup(config, series.length());
  const int dim = static_cast<int>(setup.init.size());
  const int chains = config.mcmc.chains;

  MhConfig mh;
  mh.steps = config.mcmc.steps;
  mh.burn_in = config.mcmc.burn_in;
  mh.adapt_window = config.mcmc.adapt_window;
  mh.scale = config.mcmc.scale;
  mh.init = setup.init;
  mh.init_proposal_sd = config.mcmc.init_proposal_sd;

  const auto start = std::chrono::steady_clock::now();
  std::vector<ChainTrace> traces(chains);
  {
    std::vector<std::future<ChainTrace>> futures;
    futures.reserve(chains);
    for (int chain = 0; chain < chains; ++chain) {
      futures.push_back(std::async(std::launch::async, [&, chain] {
        MhConfig local = mh;
        local.seed = config.mcmc.seed + static_cast<std::uint64_t>(chain);
        const LoglikFn loglik =
            make_loglik(config, setup, obs, series.values,
                        local.seed ^ 0x656e67696e65ULL);
        return mh_run(loglik, setup.prior, local);
      }));
    }
    for (int chain = 0; chain < chains; ++chain)
      traces[chain] = futures[chain].get();
  }
  const auto stop = std::chrono::steady_clock::now();
  const double wall = std::chrono::duration<double>(stop - start).count();

  // Natural-scale samples for reporting.
  const long kept = traces.front().samples.rows();
  std::vector<Matrix> natural(chains);
  for (int chain = 0; chain < chains; ++chain) {
    natural[chain] = traces[chain].samples;
    for (int j = 0; j < dim; ++j)
      if (setup.transforms[j] == ParamTransform::logscale)
        natural[chain].col(j) = natural[chain].col(j).array().exp();
  }

  if (config.mcmc.write_samples) {
    auto out = open_output(config.io.out, "samples.csv");
    std::vector<std::string> cols;
    if (chains > 1) cols.push_back("chain");
    cols.push_back("step");
    for (const auto& name : setup.names) cols.push_back(name);
    cols.push_back("loglik");
    cols.push_back("accepted");
    write_header(out, cols);
    for (int chain = 0; chain < chains; ++chain) {
      for (long row = 0; row < kept; ++row) {
        if (chains > 1) out << (chain + 1) << ",";
        out << (row + 1);
        for (int j = 0; j < dim; ++j)
          out << "," << fmt(natural[chain](row, j));
        out << "," << fmt(traces[chain].logliks[row]) << ","
            << int(traces[chain].accepted[row]) << "\n";
      }
    }
  }

  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  summary["engine"] = config.engine.kind;
  summary["chains"] = chains;
  summary["steps"] = config.mcmc.steps;
  summary["burn_in"] = config.mcmc.burn_in;
  summary["kept_samples"] = kept * chains;
  summary["wall_seconds"] = wall;
  {
    nlohmann::ordered_json rates = nlohmann::ordered_json::array();
    for (const auto& trace : traces) rates.push_back(trace.acceptance_rate);
    summary["acceptance_rate"] = rates;
  }

  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (int j = 0; j < dim; ++j) {
    std::vector<double> pooled;
    pooled.reserve(kept * chains);
    double total_ess = 0.0;
    std::vector<Vector> per_chain;
    for (int chain = 0; chain < chains; ++chain) {
      const Vector col = natural[chain].col(j);
      per_chain.push_back(col);
      total_ess += ess(col);
      pooled.insert(pooled.end(), col.data(), col.data() + col.size());
    }
    const double n = static_cast<double>(pooled.size());
    double mean = 0.0;
    for (double v : pooled) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : pooled) var += (v - mean) * (v - mean);
    var /= (n - 1.0);

    nlohmann::ordered_json entry = nlohmann::ordered_json::object();
    entry["mean"] = mean;
    entry["sd"] = std::sqrt(var);
    entry["q025"] = empirical_quantile(pooled, 0.025);
    entry["q50"] = empirical_quantile(pooled, 0.50);
    entry["q975"] = empirical_quantile(pooled, 0.975);
    entry["ess"] = total_ess;
    if (chains > 1) entry["rhat"] = rhat(per_chain);
    params[setup.names[j]] = entry;
  }
  summary["parameters"] = params;
  summary["config"] = nlohmann::ordered_json::parse(config.config_text);

  auto out = open_output(config.io.out, "summary.json");
  out << summary.dump(2) << "\n";
  return 0;
}

}  // namespace mbpi
