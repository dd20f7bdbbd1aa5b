#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "triomix/em.hpp"
#include "triomix/metrics.hpp"
#include "triomix/scenarios.hpp"

namespace triomix {

struct ReplicateOutcome {
  std::size_t replicate = 0;
  bool failed = false;
  std::string error;
  std::size_t selected_k = 0;
  MetricsReport em_report;          // EM fit at the sweep-selected K
  MetricsReport em_true_k_report;   // EM fit at the scenario's true K
  MetricsReport kmeans_report;      // baseline at the true K
  // fraction of truly nontransmitted sites captured by the fitted
  // near-zero-slope cluster; NaN when the scenario has no such cluster
  double nontransmission_capture = std::numeric_limits<double>::quiet_NaN();
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

struct StudyReport {
  ScenarioSpec scenario;
  std::size_t k_min = 0, k_max = 0;
  std::vector<ReplicateOutcome> replicates;

  std::map<std::size_t, std::size_t> k_frequency() const;
  double selection_rate(std::size_t k) const;
  std::size_t n_failed() const;

  // per-true-cluster aggregates over successful replicates
  Aggregate em_sensitivity(std::size_t cluster, bool at_true_k = true) const;
  Aggregate em_specificity(std::size_t cluster, bool at_true_k = true) const;
  Aggregate kmeans_sensitivity(std::size_t cluster) const;
  Aggregate kmeans_specificity(std::size_t cluster) const;
  Aggregate capture_rate() const;
};

// Full Monte Carlo pass: per replicate, generate a dataset (seed stream
// mix_seed(spec.seed, replicate)), sweep K over [k_min, k_max], fit at the
// selected and the true K, run the baseline at the true K, and score all
// three against the ground truth. Failures are recorded, not fatal.
StudyReport run_mc_study(const ScenarioSpec& spec, std::size_t n_replicates,
                         std::size_t k_min, std::size_t k_max, const EmConfig& config);

struct BootstrapResult {
  std::size_t n_reps = 0;     // requested
  std::size_t n_used = 0;     // successful resamples
  std::size_t n_skipped = 0;  // degenerate resamples (a site went constant)
  // per cluster: standard error of (gamma0, gamma1, gamma2)
  std::vector<std::array<double, 3>> coefficient_se;
};

// Case-resampling bootstrap over triads with cluster assignments held fixed:
// each resample redraws the triad columns with replacement, re-estimates the
// per-site scales, and refits each cluster's coefficients (warm-started at
// the point estimates). SE = sample standard deviation across resamples.
BootstrapResult bootstrap_se(const TriadDataset& data,
                             std::span<const std::size_t> assignments,
                             std::span<const ClusterCoefficients> point_coefficients,
                             std::size_t n_reps, std::uint64_t seed);

// Same refit machinery with caller-supplied triad index sets, one per
// resample; used for reproducibility checks.
BootstrapResult bootstrap_se(const TriadDataset& data,
                             std::span<const std::size_t> assignments,
                             std::span<const ClusterCoefficients> point_coefficients,
                             const std::vector<std::vector<std::size_t>>& index_sets);

}  // namespace triomix
