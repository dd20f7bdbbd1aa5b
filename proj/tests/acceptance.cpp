// End-to-end acceptance suite for the transmission-pattern clustering
// pipeline. Each numbered criterion is checked at full simulation scale and
// reported as a single PASS/FAIL line; the process exits nonzero if any
// criterion fails. Criterion 8 needs the original cohort data, which is not
// available, and is reported as EXCLUDED rather than silently skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "triomix/beta.hpp"
#include "triomix/em.hpp"
#include "triomix/metrics.hpp"
#include "triomix/model_select.hpp"
#include "triomix/rng.hpp"
#include "triomix/scenarios.hpp"
#include "triomix/study.hpp"
#include "triomix/subset_cluster.hpp"

using namespace triomix;

namespace {

int n_failed_criteria = 0;
std::vector<std::pair<int, std::string>> result_lines;

// buffered so the final output lists criteria in numeric order even though the
// cheap checks run before the long simulation studies
void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  const std::string line = std::string("[") + (pass ? "PASS" : "FAIL") + "] criterion " +
                           std::to_string(idx) + ": " + name + " (" + detail + ")";
  result_lines.emplace_back(idx, line);
  std::printf("       -> %s\n", line.c_str());
  std::fflush(stdout);
  if (!pass) ++n_failed_criteria;
}

void note(const std::string& msg) {
  std::printf("       ... %s\n", msg.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void note_failures(const StudyReport& study) {
  for (const ReplicateOutcome& r : study.replicates)
    if (r.failed)
      note("replicate " + std::to_string(r.replicate) + " failed: " + r.error);
}

EmConfig base_config() {
  EmConfig cfg;  // library defaults: tol 1e-7, 500 iterations, 5 restarts
  cfg.seed = 7;
  return cfg;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- criteria 1-3

void criteria_s0() {
  note("running the S0 study: 20 replicates, sweep K=2..6, 2000 sites x 60 triads");
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport study = run_mc_study(builtin_scenario("S0", 42), 20, 2, 6, base_config());
  note("S0 study finished in " + fmt(seconds_since(t0)) + " s, " +
       std::to_string(study.n_failed()) + " failed replicates");
  note_failures(study);

  const double rate = study.selection_rate(4);
  report(1, "S0 sweep selects K=4 in at least 70% of replicates", rate >= 0.70,
         "selection rate " + fmt(100.0 * rate) + "%");

  bool recovery = study.n_failed() == 0;
  double worst_sens = 1.0, worst_spec = 1.0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double sens = study.em_sensitivity(c, true).mean;
    const double spec = study.em_specificity(c, true).mean;
    worst_sens = std::min(worst_sens, sens);
    worst_spec = std::min(worst_spec, spec);
    recovery = recovery && sens >= 0.90 && spec >= 0.90;
  }
  const double c2_sens = study.em_sensitivity(1, true).mean;
  recovery = recovery && c2_sens >= 0.98;
  report(2, "S0 recovery at K=4: mean sens/spec >= 0.90 everywhere, cluster 2 sens >= 0.98",
         recovery,
         "worst sens " + fmt(worst_sens) + ", worst spec " + fmt(worst_spec) +
             ", cluster-2 sens " + fmt(c2_sens));

  const double s0_gap =
      study.em_sensitivity(2, true).mean - study.kmeans_sensitivity(2).mean;

  note("running the S1 study: 20 replicates at K=4, sizes 500/600/850/50");
  const auto t1 = std::chrono::steady_clock::now();
  const StudyReport s1 = run_mc_study(builtin_scenario("S1", 43), 20, 4, 4, base_config());
  note("S1 study finished in " + fmt(seconds_since(t1)) + " s");
  note_failures(s1);
  const double s1_gap = s1.em_sensitivity(3, true).mean - s1.kmeans_sensitivity(3).mean;

  report(3, "EM beats k-means: S0 cluster 3 by >= 0.15, S1 small cluster by >= 0.3",
         s0_gap >= 0.15 && s1_gap >= 0.3 && s1.n_failed() == 0,
         "S0 cluster-3 gap " + fmt(s0_gap) + ", S1 small-cluster gap " + fmt(s1_gap));
}

// ------------------------------------------------------------------ criterion 4

void criterion_s2() {
  note("running the S2 study: 20 replicates at K=4 with 0.90 neighbor correlation");
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport study = run_mc_study(builtin_scenario("S2", 44), 20, 4, 4, base_config());
  note("S2 study finished in " + fmt(seconds_since(t0)) + " s");
  note_failures(study);

  bool ok = study.n_failed() == 0;
  double worst = 1.0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double sens = study.em_sensitivity(c, true).mean;
    worst = std::min(worst, sens);
    ok = ok && sens >= 0.80;
  }
  report(4, "S2 with correlated neighbors keeps mean sensitivity >= 0.80", ok,
         "worst mean sensitivity " + fmt(worst));
}

// ------------------------------------------------------------------ criterion 5

void criterion_s4() {
  note("running the S4 replicate: one sweep-and-fit at 10,000 sites");
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport study = run_mc_study(builtin_scenario("S4", 45), 1, 2, 6, base_config());
  const double elapsed = seconds_since(t0);
  note("S4 replicate finished in " + fmt(elapsed) + " s");
  note_failures(study);

  bool ok = study.n_failed() == 0 && elapsed < 3600.0;
  double worst = 1.0;
  std::size_t selected = 0;
  if (ok) {
    const ReplicateOutcome& rep = study.replicates[0];
    selected = rep.selected_k;
    for (std::size_t c = 0; c < 4; ++c) {
      const double sens = rep.em_report.sensitivity(c);
      worst = std::min(worst, sens);
      ok = ok && sens >= 0.90;
    }
  }
  report(5, "S4 at 10,000 sites: pipeline completes under an hour with sens >= 0.90", ok,
         "selected K=" + std::to_string(selected) + ", worst sensitivity " + fmt(worst) +
             ", " + fmt(elapsed) + " s");
}

// ------------------------------------------------------------------ criterion 6

void criterion_nt1() {
  note("running the NT1 study: 5 replicates, capture of the nontransmitted sites");
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport study = run_mc_study(builtin_scenario("NT1", 46), 5, 2, 6, base_config());
  note("NT1 study finished in " + fmt(seconds_since(t0)) + " s");
  note_failures(study);

  bool ok = study.n_failed() == 0;
  double lowest = 1.0;
  for (const ReplicateOutcome& rep : study.replicates) {
    if (rep.failed || std::isnan(rep.nontransmission_capture)) {
      ok = false;
      continue;
    }
    lowest = std::min(lowest, rep.nontransmission_capture);
    ok = ok && rep.nontransmission_capture >= 0.5;
  }
  report(6, "NT1 capture of truly nontransmitted sites >= 0.5 in every replicate", ok,
         "lowest capture " + fmt(lowest));
}

// ------------------------------------------------------------------ criterion 7

bool prop_monotone(std::string& log) {
  Rng meta(555);
  std::uniform_real_distribution<double> slope(-2.0, 2.0), icpt(-2.5, 1.5);
  double worst_violation = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    ScenarioSpec spec;
    spec.n_triads = 8;
    spec.seed = 5000 + t;
    spec.clusters = {{{icpt(meta), slope(meta), slope(meta)}, 15, 0.0},
                     {{icpt(meta), slope(meta), slope(meta)}, 15, 0.0}};
    const GeneratedDataset gen = generate_dataset(spec);
    const auto scales = compute_site_scales(gen.data).scales;
    EmConfig cfg;
    cfg.n_clusters = 2;
    cfg.n_restarts = 2;
    cfg.tol = 1e-8;
    cfg.max_iter = 200;
    cfg.seed = t;
    const MixtureState state = run_em(gen.data, scales, cfg);
    for (std::size_t i = 1; i < state.loglik_trace.size(); ++i)
      worst_violation = std::max(worst_violation,
                                 state.loglik_trace[i - 1] - state.loglik_trace[i]);
  }
  log += "monotone over 50 instances (worst backstep " + fmt(worst_violation) + "); ";
  return worst_violation <= 1e-8;
}

bool prop_estep_brute_force(std::string& log) {
  TriadDataset d;
  d.n_triads = 3;
  d.n_sites = 4;
  d.site_ids = {"s0", "s1", "s2", "s3"};
  d.subject_ids = {"t0", "t1", "t2"};
  d.child_values = {0.12, 0.18, 0.25, 0.55, 0.62, 0.48,
                    0.81, 0.74, 0.88, 0.33, 0.41, 0.29};
  d.mother_values = {0.22, 0.15, 0.31, 0.58, 0.49, 0.66,
                     0.72, 0.83, 0.77, 0.38, 0.27, 0.45};
  d.father_values = {0.09, 0.21, 0.17, 0.61, 0.52, 0.44,
                     0.69, 0.78, 0.90, 0.50, 0.36, 0.42};
  const auto scales = compute_site_scales(d).scales;
  const SiteWorkspace ws = SiteWorkspace::build(d, scales);

  const std::vector<ClusterCoefficients> coeffs{{0.2, 0.5, -0.3}, {-1.0, 0.1, 0.8}};
  const std::vector<double> mixing{0.6, 0.4};
  const auto resp = e_step(coeffs, mixing, ws);

  double worst = 0.0;
  for (std::size_t j = 0; j < d.n_sites; ++j) {
    long double lik[2];
    for (std::size_t k = 0; k < 2; ++k) {
      double ll = 0.0;
      const double mu = child_cluster_mean(coeffs[k], scales[j]);
      const BetaScale cs = BetaScale::from_mean_precision(mu, scales[j].child_precision);
      for (std::size_t i = 0; i < d.n_triads; ++i) {
        ll += beta_log_density(d.child(j, i), cs);
        ll += beta_log_density(d.mother(j, i), scales[j].mother);
        ll += beta_log_density(d.father(j, i), scales[j].father);
      }
      lik[k] = std::exp(static_cast<long double>(ll));
    }
    const long double denom = 0.6L * lik[0] + 0.4L * lik[1];
    worst = std::max(worst,
                     std::fabs(resp[j * 2] - static_cast<double>(0.6L * lik[0] / denom)));
    worst = std::max(
        worst, std::fabs(resp[j * 2 + 1] - static_cast<double>(0.4L * lik[1] / denom)));
  }
  log += "e-step brute force (max dev " + fmt(worst) + "); ";
  return worst <= 1e-10;
}

bool prop_gradient(std::string& log) {
  ScenarioSpec spec;
  spec.n_triads = 10;
  spec.seed = 17;
  spec.clusters = {{{-0.5, 1.6, 0.0}, 15, 0.0}, {{1.0, 0.0, -1.4}, 15, 0.0}};
  const GeneratedDataset gen = generate_dataset(spec);
  const auto scales = compute_site_scales(gen.data).scales;
  const SiteWorkspace ws = SiteWorkspace::build(gen.data, scales);

  Rng rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5), w(0.05, 1.0);
  std::vector<double> weights(ws.n_sites);
  for (double& x : weights) x = w(rng);

  const double h = 1e-5;
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    ClusterCoefficients c{u(rng), u(rng), u(rng)};
    std::array<double, 3> grad{};
    cluster_objective(ws, weights, c, &grad);
    for (int dim = 0; dim < 3; ++dim) {
      ClusterCoefficients lo = c, hi = c;
      (dim == 0 ? lo.gamma0 : dim == 1 ? lo.gamma1 : lo.gamma2) -= h;
      (dim == 0 ? hi.gamma0 : dim == 1 ? hi.gamma1 : hi.gamma2) += h;
      const double fd =
          (cluster_objective(ws, weights, hi) - cluster_objective(ws, weights, lo)) /
          (2.0 * h);
      worst = std::max(worst, std::fabs(grad[dim] - fd) / std::max(1.0, std::fabs(fd)));
    }
  }
  log += "gradient vs finite differences (max rel dev " + fmt(worst) + "); ";
  return worst <= 1e-4;
}

bool prop_normalization(std::string& log, const MixtureState& state) {
  double worst = 0.0;
  for (std::size_t j = 0; j < state.n_sites; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < state.n_clusters; ++k) row += state.resp(j, k);
    worst = std::max(worst, std::fabs(row - 1.0));
  }
  double pis = 0.0;
  for (double p : state.mixing) pis += p;
  worst = std::max(worst, std::fabs(pis - 1.0));
  log += "normalization (max dev " + fmt(worst) + "); ";
  return worst <= 1e-10;
}

bool prop_bic(std::string& log) {
  const double dev = std::fabs(bic_value(0.0, 1, 1, 1) - 9.0 * std::log(3.0));
  log += "bic spot value (dev " + fmt(dev) + "); ";
  return dev <= 1e-12;
}

bool prop_subset_count(std::string& log) {
  const std::size_t m = min_subset_count(4063, 2000, 1.0);
  log += "subset count J=4063,S=2000 -> m=" + std::to_string(m) + "; ";
  return m == 7 && coverage_miss_pct(4063, 2000, 6) > 1.0;
}

bool prop_permutation(std::string& log, const SiteWorkspace& ws,
                      const MixtureState& state) {
  std::vector<ClusterCoefficients> rot(state.coefficients.rbegin(),
                                       state.coefficients.rend());
  std::vector<double> mix(state.mixing.rbegin(), state.mixing.rend());
  const double base = observed_loglik(ws, state.coefficients, state.mixing);
  const double swapped = observed_loglik(ws, rot, mix);
  const double dev = std::fabs(base - swapped);
  log += "label permutation invariance (dev " + fmt(dev) + "); ";
  return dev <= 1e-6;
}

bool prop_moments(std::string& log) {
  const double m = 0.3, v = 21.0 / 1100.0;  // Beta(3,7) moments
  const double d = std::sqrt(v / 2.0);
  const BetaScale s = estimate_scales_from_moments(std::vector<double>{m - d, m + d});
  const double dev = std::max(std::fabs(s.alpha - 3.0), std::fabs(s.beta - 7.0));
  log += "moment round trip (dev " + fmt(dev) + ")";
  return dev <= 1e-9;
}

void criterion_properties() {
  note("running the deterministic property suite");
  std::string log;
  bool ok = true;
  ok &= prop_monotone(log);
  ok &= prop_estep_brute_force(log);
  ok &= prop_gradient(log);

  // one moderate fit shared by the normalization and permutation checks
  ScenarioSpec spec;
  spec.n_triads = 10;
  spec.seed = 88;
  spec.clusters = {{{-0.5, 1.6, 0.0}, 25, 0.0}, {{1.0, 0.0, -1.4}, 25, 0.0}};
  const GeneratedDataset gen = generate_dataset(spec);
  const auto scales = compute_site_scales(gen.data).scales;
  const SiteWorkspace ws = SiteWorkspace::build(gen.data, scales);
  EmConfig cfg;
  cfg.n_clusters = 2;
  cfg.n_restarts = 2;
  cfg.seed = 3;
  const MixtureState state = run_em(ws, cfg);

  ok &= prop_normalization(log, state);
  ok &= prop_bic(log);
  ok &= prop_subset_count(log);
  ok &= prop_permutation(log, ws, state);
  ok &= prop_moments(log);

  report(7, "property suite", ok, log);
}

}  // namespace

int main() {
  std::printf("acceptance suite: transmission-pattern clustering pipeline\n");
  const auto t0 = std::chrono::steady_clock::now();

  // cheap deterministic checks first so a broken build fails fast, then the
  // simulation studies in rough order of diagnostic value
  criterion_properties();
  criteria_s0();
  criterion_s2();
  criterion_s4();
  criterion_nt1();

  result_lines.emplace_back(
      8,
      "[EXCLUDED] criterion 8: real-cohort replication needs the original "
      "methylation dataset, which is not distributable with this repository");

  std::printf("\n==== results ====\n");
  std::sort(result_lines.begin(), result_lines.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, line] : result_lines) std::printf("%s\n", line.c_str());

  std::printf("acceptance suite finished in %.1f s: %s\n", seconds_since(t0),
              n_failed_criteria == 0 ? "all runnable criteria passed"
                                     : (std::to_string(n_failed_criteria) +
                                        " criterion(s) failed")
                                           .c_str());
  return n_failed_criteria == 0 ? 0 : 1;
}
