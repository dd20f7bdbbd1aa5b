#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "triomix/pipeline.hpp"

// Command-line front end for the transmission-pattern clustering pipeline.
// Every run writes its artifacts plus a run_manifest.txt into the output
// directory; `rerun` replays a manifest to reproduce those artifacts.

namespace {

void add_em_options(CLI::App* cmd, triomix::RunConfig& config) {
  cmd->add_option("--output", config.output_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--seed", config.seed, "master seed; all randomness derives from it")
      ->capture_default_str();
  cmd->add_option("--tol", config.tol, "EM convergence tolerance")
      ->capture_default_str();
  cmd->add_option("--max-iter", config.max_iter, "EM iteration cap")
      ->capture_default_str();
  cmd->add_option("--restarts", config.n_restarts, "EM random restarts")
      ->capture_default_str();
}

void add_input_options(CLI::App* cmd, triomix::RunConfig& config) {
  cmd->add_option("--input", config.input_path, "long-format CSV with triad values")
      ->required();
  cmd->add_option("--format", config.input_format, "beta-csv or intensity-csv")
      ->check(CLI::IsMember({"beta-csv", "intensity-csv"}))
      ->capture_default_str();
  cmd->add_flag("--screen", config.screen,
                "drop sites whose parent-child correlations fall below the cutoff");
  cmd->add_option("--cutoff", config.cutoff, "screening correlation cutoff")
      ->capture_default_str();
}

void add_k_range_options(CLI::App* cmd, triomix::RunConfig& config) {
  cmd->add_option("--k-min", config.k_min, "smallest cluster count to try")
      ->capture_default_str();
  cmd->add_option("--k-max", config.k_max, "largest cluster count to try")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Clusters CpG sites by their parent-to-offspring methylation "
      "transmission pattern using a Beta-regression mixture model"};
  app.require_subcommand(1);

  triomix::RunConfig config;
  std::string manifest_path;
  std::string output_override;

  CLI::App* fit = app.add_subcommand("fit", "fit the mixture at a fixed cluster count");
  add_input_options(fit, config);
  add_em_options(fit, config);
  fit->add_option("--k", config.k, "number of clusters")->required();

  CLI::App* sweep =
      app.add_subcommand("sweep", "fit a range of cluster counts and pick one by BIC");
  add_input_options(sweep, config);
  add_em_options(sweep, config);
  add_k_range_options(sweep, config);

  CLI::App* subsets = app.add_subcommand(
      "subsets", "two-stage clustering over random site subsets for large inputs");
  add_input_options(subsets, config);
  add_em_options(subsets, config);
  add_k_range_options(subsets, config);
  subsets->add_option("--subset-size", config.subset_size, "sites per subset (S)")
      ->required();
  subsets
      ->add_option("--miss-budget", config.miss_budget,
                   "max expected percent of sites never sampled")
      ->capture_default_str();
  subsets
      ->add_option("--subsets", config.forced_subsets,
                   "force the subset count instead of deriving it from the budget")
      ->capture_default_str();

  CLI::App* simulate =
      app.add_subcommand("simulate", "run a Monte Carlo study on a built-in scenario");
  add_em_options(simulate, config);
  add_k_range_options(simulate, config);
  simulate
      ->add_option("--scenario", config.scenario,
                   "S0, S1, S2, S3, S4, TN, NT1 or NT2")
      ->required();
  simulate->add_option("--replicates", config.replicates, "Monte Carlo replicates")
      ->capture_default_str();

  CLI::App* bootstrap = app.add_subcommand(
      "bootstrap", "fit at a fixed cluster count and attach bootstrap standard errors");
  add_input_options(bootstrap, config);
  add_em_options(bootstrap, config);
  bootstrap->add_option("--k", config.k, "number of clusters")->required();
  bootstrap->add_option("--reps", config.bootstrap_reps, "bootstrap resamples")
      ->capture_default_str();

  CLI::App* rerun =
      app.add_subcommand("rerun", "reproduce a previous run from its manifest");
  rerun->add_option("--manifest", manifest_path, "path to a run_manifest.txt")
      ->required();
  rerun->add_option("--output", output_override, "override the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rerun->parsed()) {
      config = triomix::read_manifest(manifest_path);
      if (!output_override.empty()) config.output_dir = output_override;
    } else {
      config.command = app.get_subcommands().front()->get_name();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return triomix::run_pipeline(config);
}
