// cutlab command-line runner: parses an experiment config, dispatches the
// matching experiment kind, and reports where the data file and manifest
// landed. The subcommand and the config's `kind` must agree, so a script
// cannot silently run the wrong experiment from a stale config.
//
// Exit codes: 0 success; 2 invalid configuration (every violation listed on
// stderr); 3 runtime failure during execution or output writing.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cutlab/harness.hpp"

namespace {

struct CliArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

int run_kind(cutlab::ExperimentKind kind, const char* sub_name, const CliArgs& args) {
  try {
    cutlab::ExperimentConfig cfg = cutlab::parse_config_file(args.config);
    if (cfg.kind != kind)
      throw cutlab::ConfigError({std::string("config kind '") + cutlab::kind_name(cfg.kind) +
                                 "' does not match subcommand '" + sub_name + "' (expected kind '" +
                                 cutlab::kind_name(kind) + "')"});
    if (args.seed) cfg.seed = *args.seed;
    if (args.workers) cfg.workers = *args.workers;
    if (!args.out.empty()) cfg.out = args.out;

    cutlab::RunManifest man = cutlab::run_experiment(cfg);
    std::cout << "wrote " << man.output.path << " (" << man.output.rows << " rows, sha256 "
              << man.output.sha256 << ")\n"
              << "manifest " << man.manifest_path << "\n"
              << "workers " << man.workers_resolved << ", wall_seconds " << man.wall_seconds
              << "\n";
    return 0;
  } catch (const cutlab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using K = cutlab::ExperimentKind;
  CLI::App app{"cutlab: Monte Carlo laboratory for cut points of simple random walks"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    K kind;
    const char* help;
  };
  const Sub subs[] = {
      {"xi", K::xi, "fit the non-intersection decay exponent across scales"},
      {"onepoint", K::one_point, "cut-point frequency at one bulk point"},
      {"twopoint", K::two_point, "joint cut-point frequency at two bulk points"},
      {"moments", K::moments, "first and second moments of the cut-point count"},
      {"cutball", K::cutball, "discrete cut-ball frequency at one bulk point"},
      {"couple", K::couple, "walk/Brownian coupling deviation diagnostics"},
      {"l2box", K::l2box, "coupled box-mass L2 diagnostics across scales"},
      {"boxdim", K::dimension, "box-counting dimension of the cut-point set"},
      {"ruin", K::ruin, "fine-grid annulus exit probability vs the closed form"},
      {"beurling", K::beurling, "escape probability past a radial half-line barrier"},
  };

  CliArgs args;
  int exit_code = 0;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", args.config, "experiment config file (key = value lines)")
        ->required();
    sub->add_option("--seed", args.seed, "override the config's seed");
    sub->add_option("--workers", args.workers, "override the config's worker count (0 = auto)");
    sub->add_option("--out", args.out, "override the config's output path");
    sub->callback([&args, &exit_code, s] { exit_code = run_kind(s.kind, s.name, args); });
  }

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
