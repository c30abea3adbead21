// Command-line front end: simulate | filter | infer over a JSON config.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "mbpi/cli_io.hpp"
#include "mbpi/errors.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string engine;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int chains = 0;
};

mbpi::RunConfig configure(const Overrides& overrides) {
  mbpi::RunConfig config = mbpi::load_config(overrides.config_path);
  if (overrides.seed_set) config.mcmc.seed = overrides.seed;
  if (!overrides.engine.empty()) config.engine.kind = overrides.engine;
  if (!overrides.out.empty()) config.io.out = overrides.out;
  if (overrides.chains > 0) config.mcmc.chains = overrides.chains;
  if (config.engine.kind != "gaussian" && config.engine.kind != "particle" &&
      config.engine.kind != "hybrid")
    throw mbpi::ConfigError("engine must be gaussian, particle or hybrid");
  return config;
}

void add_common(CLI::App* cmd, Overrides& overrides) {
  cmd->add_option("--config", overrides.config_path, "JSON run configuration")
      ->required();
  cmd->add_option("--seed", overrides.seed, "RNG seed override")
      ->each([&overrides](const std::string&) { overrides.seed_set = true; });
  cmd->add_option("--engine", overrides.engine,
                  "likelihood engine: gaussian|particle|hybrid");
  cmd->add_option("--out", overrides.out, "output directory override");
  cmd->add_option("--chains", overrides.chains, "number of MH chains");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching-process simulation, filtering and inference"};
  app.require_subcommand(1);

  Overrides overrides;
  CLI::App* sim = app.add_subcommand("simulate", "simulate model realisations");
  CLI::App* filter = app.add_subcommand("filter", "run a filtering pass");
  CLI::App* infer = app.add_subcommand("infer", "sample parameter posteriors");
  add_common(sim, overrides);
  add_common(filter, overrides);
  add_common(infer, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const mbpi::RunConfig config = configure(overrides);
    if (sim->parsed()) return mbpi::cmd_simulate(config);
    if (filter->parsed()) return mbpi::cmd_filter(config);
    return mbpi::cmd_infer(config);
  } catch (const mbpi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mbpi::ParseError& e) {
    std::cerr << "parse error";
    if (e.line >= 0) std::cerr << " (line " << e.line << ")";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const mbpi::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const mbpi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
