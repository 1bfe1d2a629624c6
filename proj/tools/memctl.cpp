// memctl: derive / simulate / analyze / fit / pipeline front end.
//
// Exit status: 0 success, 1 invalid configuration or input, 2 runtime or fit failure.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "dlcz/commands.hpp"
#include "dlcz/errors.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> trials;
  std::optional<double> significance;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--trials", o.trials, "Trials per delay");
  cmd->add_option("--significance", o.significance, "Cauchy-Schwarz threshold in standard errors");
  cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

dlcz::RunConfig resolve_config(const Overrides& o) {
  dlcz::RunConfig cfg = o.config_path.empty() ? dlcz::RunConfig{} : dlcz::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.trials) cfg.trials_per_delay = *o.trials;
  if (o.significance) cfg.significance = *o.significance;
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DLCZ quantum memory simulation and analysis"};
  app.set_version_flag("--version", std::string("memctl ") + dlcz::kToolVersion);
  app.require_subcommand(1);

  Overrides o;
  std::string input;
  auto* derive = app.add_subcommand("derive", "Print and record derived trap and dephasing quantities");
  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo and write an event file");
  auto* analyze = app.add_subcommand("analyze", "Correlation sweep and Cauchy-Schwarz test of an event file");
  auto* fit = app.add_subcommand("fit", "Fit the two-time decay to a correlation table");
  auto* pipeline = app.add_subcommand("pipeline", "simulate, analyze and fit in one run");
  for (auto* cmd : {derive, simulate, analyze, fit, pipeline}) add_common(cmd, o);
  analyze->add_option("events", input, "Event file")->required();
  fit->add_option("results", input, "Correlation table")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve_config(o);
    if (derive->parsed()) {
      dlcz::cmd_derive(cfg, std::cout);
    } else if (simulate->parsed()) {
      dlcz::cmd_simulate(cfg, std::cout);
    } else if (analyze->parsed()) {
      dlcz::cmd_analyze(input, cfg, std::cout);
    } else if (fit->parsed()) {
      dlcz::cmd_fit(input, cfg, std::cout);
    } else {
      dlcz::cmd_pipeline(cfg, std::cout);
    }
  } catch (const dlcz::ValidationError& e) {
    std::cerr << "memctl: invalid " << e.what() << '\n';
    return 1;
  } catch (const dlcz::FormatError& e) {
    std::cerr << "memctl: malformed input, " << e.what() << '\n';
    return 1;
  } catch (const dlcz::UnsupportedInputError& e) {
    std::cerr << "memctl: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "memctl: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
