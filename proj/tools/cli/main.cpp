#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

const char* describe(const std::string& name) {
  if (name == "simulate") return "Sample the initial cloud, iterate it and write snapshots and ensemble means";
  if (name == "oracle") return "Spectral oracle for the mean, its Cesaro averages and envelope";
  if (name == "compare") return "Monte Carlo means against the oracle, as z-scores";
  if (name == "clt") return "Normalized Birkhoff sums: variance, KS test, Lindeberg diagnostic";
  if (name == "covariance") return "Lag covariances A_{N,h} with convergence checks";
  if (name == "counterexample") return "Resonant noise on a single fiber: Cesaro non-convergence";
  return "Scan a grid of actions for near-resonances k*omega(I) in 2*pi*Z";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twist-ensemble: ensembles of a perturbed twist map"};
  app.require_subcommand(1);
  twist::cli::CommandOptions opts;
  std::string out;
  std::uint64_t seed = 0;

  for (const auto& name : twist::cli::command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Master seed (overrides seed)");
    sub->add_option("--threads", opts.threads, "Worker threads; 0 uses all cores")->check(CLI::NonNegativeNumber);
    sub->add_flag("--full-scale", opts.full_scale, "Merge the config's full_scale block");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return twist::cli::kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--out") > 0) opts.out_dir = out;
  if (sub->count("--seed") > 0) opts.seed = seed;
  return twist::cli::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
