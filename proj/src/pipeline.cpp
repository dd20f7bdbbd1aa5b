#include "triomix/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "triomix/io.hpp"
#include "triomix/rng.hpp"
#include "triomix/scenarios.hpp"
#include "triomix/study.hpp"
#include "triomix/subset_cluster.hpp"

namespace triomix {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& config, const std::string& name) {
  return (fs::path(config.output_dir) / name).string();
}

EmConfig em_config(const RunConfig& config) {
  EmConfig cfg;
  cfg.n_clusters = config.k;
  cfg.tol = config.tol;
  cfg.max_iter = config.max_iter;
  cfg.n_restarts = config.n_restarts;
  cfg.seed = config.seed;
  return cfg;
}

TriadDataset load_input(const RunConfig& config,
                        std::map<std::string, std::string>& extra) {
  IngestReport report;
  TriadDataset data = ingest_triads(config.input_path, config.input_format, &report);
  extra["ingested_sites"] = std::to_string(data.n_sites);
  extra["ingested_triads"] = std::to_string(data.n_triads);
  extra["clipped_values"] = std::to_string(report.n_clipped);
  if (!config.screen) return data;

  ScreenOutcome screened = screen_sites(data, config.cutoff);
  extra["screened_out_sites"] = std::to_string(screened.n_excluded);
  std::ofstream rep(out_path(config, "screen_report.csv"));
  rep << "site_id,mother_child_corr,father_child_corr,passed,degenerate\n";
  for (const SiteScreen& s : screened.sites)
    rep << s.site_id << ',' << format_double(s.mother_child_corr) << ','
        << format_double(s.father_child_corr) << ',' << (s.passed ? 1 : 0) << ','
        << (s.degenerate ? 1 : 0) << '\n';
  if (screened.filtered.n_sites == 0)
    throw std::runtime_error("screening removed every site");
  return std::move(screened.filtered);
}

void run_fit(const RunConfig& config, std::map<std::string, std::string>& extra) {
  if (config.k == 0) throw std::invalid_argument("fit: --k is required");
  const TriadDataset data = load_input(config, extra);
  const SiteScalesResult scales = compute_site_scales(data);
  extra["variance_clamped_sites"] = std::to_string(scales.n_variance_clamped);
  const MixtureState fit = run_em(data, scales.scales, em_config(config));
  extra["loglik"] = format_double(fit.loglik());
  extra["converged"] = fit.converged ? "1" : "0";
  extra["iterations"] = std::to_string(fit.iteration);
  write_assignments_csv(out_path(config, "assignments.csv"), data, fit);
  write_coefficients_csv(out_path(config, "coefficients.csv"), fit);
}

void run_sweep(const RunConfig& config, std::map<std::string, std::string>& extra) {
  const TriadDataset data = load_input(config, extra);
  const SiteScalesResult scales = compute_site_scales(data);
  const KSweepResult sweep =
      sweep_k(data, scales.scales, config.k_min, config.k_max, em_config(config));
  extra["selected_k"] = std::to_string(sweep.selected_k);
  extra["selection_rule"] = sweep.selection_rule;
  write_bic_curve_csv(out_path(config, "bic_curve.csv"), sweep.records);
  const MixtureState& fit = sweep.selected_fit();
  write_assignments_csv(out_path(config, "assignments.csv"), data, fit);
  write_coefficients_csv(out_path(config, "coefficients.csv"), fit);
}

void run_subsets(const RunConfig& config, std::map<std::string, std::string>& extra) {
  if (config.subset_size == 0)
    throw std::invalid_argument("subsets: --subset-size is required");
  const TriadDataset data = load_input(config, extra);
  const SiteScalesResult scales = compute_site_scales(data);

  const SubsetPlan plan =
      config.forced_subsets > 0
          ? plan_subsets_forced(data.n_sites, config.subset_size,
                                config.forced_subsets, config.miss_budget, config.seed)
          : plan_subsets(data.n_sites, config.subset_size, config.miss_budget,
                         config.seed);
  extra["n_subsets"] = std::to_string(plan.n_subsets);
  extra["coverage_miss_pct"] = format_double(
      coverage_miss_pct(plan.n_sites, plan.subset_size, plan.n_subsets));

  const TwoStageResult result = cluster_by_subsets(
      data, scales.scales, plan, em_config(config), config.k_min, config.k_max);
  extra["n_groups"] = std::to_string(result.n_groups);
  extra["conflicts_resolved"] = std::to_string(result.conflicts_resolved);

  {
    std::ofstream out(out_path(config, "assignments.csv"));
    out << "site_id,cluster,post_hoc\n";
    for (std::size_t j = 0; j < data.n_sites; ++j)
      out << data.site_ids[j] << ',' << result.final_assignments[j] << ','
          << (result.post_hoc[j] ? 1 : 0) << '\n';
  }
  {
    std::ofstream out(out_path(config, "stage1_gammas.csv"));
    out << "subset,cluster,gamma0,gamma1,gamma2,size\n";
    for (const StageOneGamma& g : result.stage1_gammas)
      out << g.subset_id << ',' << g.cluster_id << ','
          << format_double(g.coefficients.gamma0) << ','
          << format_double(g.coefficients.gamma1) << ','
          << format_double(g.coefficients.gamma2) << ',' << format_double(g.size)
          << '\n';
  }
  {
    std::vector<std::size_t> sizes(result.n_groups, 0);
    for (std::size_t a : result.final_assignments) ++sizes[a];
    std::ofstream out(out_path(config, "coefficients.csv"));
    out << "cluster,gamma0,gamma1,gamma2,n_sites\n";
    for (std::size_t g = 0; g < result.n_groups; ++g)
      out << g << ',' << format_double(result.final_coefficients[g].gamma0) << ','
          << format_double(result.final_coefficients[g].gamma1) << ','
          << format_double(result.final_coefficients[g].gamma2) << ',' << sizes[g]
          << '\n';
  }
}

void run_simulate(const RunConfig& config, std::map<std::string, std::string>& extra) {
  if (config.scenario.empty())
    throw std::invalid_argument("simulate: --scenario is required");
  const ScenarioSpec spec = builtin_scenario(config.scenario, config.seed);
  extra["scenario_sites"] = std::to_string(spec.total_sites());
  extra["scenario_clusters"] = std::to_string(spec.clusters.size());

  const StudyReport study = run_mc_study(spec, config.replicates, config.k_min,
                                         config.k_max, em_config(config));
  extra["failed_replicates"] = std::to_string(study.n_failed());

  {
    std::ofstream out(out_path(config, "k_frequency.csv"));
    out << "k,count\n";
    for (const auto& [k, count] : study.k_frequency()) out << k << ',' << count << '\n';
  }
  {
    std::ofstream out(out_path(config, "metrics_summary.csv"));
    out << "method,cluster,mean_sensitivity,sd_sensitivity,mean_specificity,"
           "sd_specificity\n";
    const auto row = [&](const char* method, std::size_t c, Aggregate sens,
                         Aggregate spec_agg) {
      out << method << ',' << c << ',' << format_double(sens.mean) << ','
          << format_double(sens.sd) << ',' << format_double(spec_agg.mean) << ','
          << format_double(spec_agg.sd) << '\n';
    };
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
      row("em_true_k", c, study.em_sensitivity(c, true), study.em_specificity(c, true));
      row("em_selected_k", c, study.em_sensitivity(c, false),
          study.em_specificity(c, false));
      row("kmeans", c, study.kmeans_sensitivity(c), study.kmeans_specificity(c));
    }
  }
  const Aggregate capture = study.capture_rate();
  if (capture.n > 0) {
    extra["nontransmission_capture_mean"] = format_double(capture.mean);
    extra["nontransmission_capture_sd"] = format_double(capture.sd);
  }
  if (config.replicates == 1) {
    // single replicate: also emit the generated data for downstream commands
    ScenarioSpec rep_spec = spec;
    rep_spec.seed = mix_seed(spec.seed, 0);
    const GeneratedDataset gen = generate_dataset(rep_spec);
    export_triads(gen.data, out_path(config, "dataset.csv"));
    std::ofstream out(out_path(config, "truth.csv"));
    out << "site_id,cluster\n";
    for (std::size_t j = 0; j < gen.data.n_sites; ++j)
      out << gen.data.site_ids[j] << ',' << gen.truth[j] << '\n';
  }
}

void run_bootstrap(const RunConfig& config, std::map<std::string, std::string>& extra) {
  if (config.k == 0) throw std::invalid_argument("bootstrap: --k is required");
  const TriadDataset data = load_input(config, extra);
  const SiteScalesResult scales = compute_site_scales(data);
  const MixtureState fit = run_em(data, scales.scales, em_config(config));
  extra["loglik"] = format_double(fit.loglik());

  const auto assignments = hard_assignments(fit);
  const BootstrapResult boot =
      bootstrap_se(data, assignments, fit.coefficients, config.bootstrap_reps,
                   mix_seed(config.seed, 0xb007u));
  extra["bootstrap_used"] = std::to_string(boot.n_used);
  extra["bootstrap_skipped"] = std::to_string(boot.n_skipped);

  write_assignments_csv(out_path(config, "assignments.csv"), data, fit);
  write_coefficients_csv(out_path(config, "coefficients.csv"), fit,
                         &boot.coefficient_se);
}

}  // namespace

void write_manifest(const RunConfig& config,
                    const std::map<std::string, std::string>& extra,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  out << "version=" << kVersion << '\n';
  out << "command=" << config.command << '\n';
  out << "input=" << config.input_path << '\n';
  out << "format=" << config.input_format << '\n';
  out << "output=" << config.output_dir << '\n';
  out << "k=" << config.k << '\n';
  out << "k_min=" << config.k_min << '\n';
  out << "k_max=" << config.k_max << '\n';
  out << "tol=" << format_double(config.tol) << '\n';
  out << "max_iter=" << config.max_iter << '\n';
  out << "restarts=" << config.n_restarts << '\n';
  out << "seed=" << config.seed << '\n';
  out << "screen=" << (config.screen ? 1 : 0) << '\n';
  out << "cutoff=" << format_double(config.cutoff) << '\n';
  out << "subset_size=" << config.subset_size << '\n';
  out << "miss_budget=" << format_double(config.miss_budget) << '\n';
  out << "forced_subsets=" << config.forced_subsets << '\n';
  out << "scenario=" << config.scenario << '\n';
  out << "replicates=" << config.replicates << '\n';
  out << "bootstrap_reps=" << config.bootstrap_reps << '\n';
  for (const auto& [key, value] : extra) out << key << '=' << value << '\n';
  if (!out) throw std::runtime_error("manifest write failed for '" + path + "'");
}

RunConfig read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error("manifest '" + path + "' is missing key '" + key + "'");
    return it->second;
  };
  RunConfig config;
  config.command = need("command");
  config.input_path = need("input");
  config.input_format = need("format");
  config.output_dir = need("output");
  config.k = std::stoull(need("k"));
  config.k_min = std::stoull(need("k_min"));
  config.k_max = std::stoull(need("k_max"));
  config.tol = std::stod(need("tol"));
  config.max_iter = std::stoull(need("max_iter"));
  config.n_restarts = std::stoull(need("restarts"));
  config.seed = std::stoull(need("seed"));
  config.screen = need("screen") == "1";
  config.cutoff = std::stod(need("cutoff"));
  config.subset_size = std::stoull(need("subset_size"));
  config.miss_budget = std::stod(need("miss_budget"));
  config.forced_subsets = std::stoull(need("forced_subsets"));
  config.scenario = need("scenario");
  config.replicates = std::stoull(need("replicates"));
  config.bootstrap_reps = std::stoull(need("bootstrap_reps"));
  return config;
}

int run_pipeline(const RunConfig& config) {
  try {
    fs::create_directories(config.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "cannot create output directory '" << config.output_dir
              << "': " << e.what() << '\n';
    return 2;
  }

  try {
    std::map<std::string, std::string> extra;
    if (config.command == "fit") {
      run_fit(config, extra);
    } else if (config.command == "sweep") {
      run_sweep(config, extra);
    } else if (config.command == "subsets") {
      run_subsets(config, extra);
    } else if (config.command == "simulate") {
      run_simulate(config, extra);
    } else if (config.command == "bootstrap") {
      run_bootstrap(config, extra);
    } else {
      throw std::invalid_argument("unknown command '" + config.command + "'");
    }
    write_manifest(config, extra, out_path(config, "run_manifest.txt"));
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["command"] = config.command;
    err["error"] = e.what();
    err["exit_code"] = 1;
    std::ofstream out(out_path(config, "error.json"));
    out << err.dump(2) << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace triomix
