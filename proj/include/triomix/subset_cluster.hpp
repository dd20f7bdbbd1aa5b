#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "triomix/em.hpp"
#include "triomix/model_select.hpp"

namespace triomix {

// A coverage plan: m random site subsets of size S such that the expected
// fraction of never-sampled sites is at most miss_budget_pct percent.
struct SubsetPlan {
  std::size_t n_sites = 0;
  std::size_t subset_size = 0;    // S
  std::size_t n_subsets = 0;      // m
  double miss_budget_pct = 0.0;   // eta
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> subsets;  // each sorted, S distinct indices
};

// Expected percentage of sites never sampled: 100 * (1 - S/J)^m.
double coverage_miss_pct(std::size_t n_sites, std::size_t subset_size,
                         std::size_t n_subsets);

// Smallest m with coverage_miss_pct <= miss_budget_pct.
std::size_t min_subset_count(std::size_t n_sites, std::size_t subset_size,
                             double miss_budget_pct);

SubsetPlan plan_subsets(std::size_t n_sites, std::size_t subset_size,
                        double miss_budget_pct, std::uint64_t seed);

// Same plan but with the subset count forced (e.g. to overshoot coverage).
SubsetPlan plan_subsets_forced(std::size_t n_sites, std::size_t subset_size,
                               std::size_t n_subsets, double miss_budget_pct,
                               std::uint64_t seed);

struct StageOneGamma {
  std::size_t subset_id = 0;
  std::size_t cluster_id = 0;
  ClusterCoefficients coefficients;
  double size = 0.0;  // responsibility mass of the cluster within its subset
};

struct TwoStageResult {
  std::vector<StageOneGamma> stage1_gammas;
  std::vector<std::size_t> stage1_groups;               // final group per stage-1 cluster
  std::vector<ClusterCoefficients> final_coefficients;  // one per final group
  std::vector<std::size_t> final_assignments;           // length J
  std::vector<bool> post_hoc;          // true for sites never covered by the plan
  std::size_t conflicts_resolved = 0;  // sites whose subsets disagreed on the group
  std::size_t n_groups = 0;
  std::vector<std::size_t> selected_k_per_subset;
  std::vector<std::vector<std::size_t>> subsets_used;  // after any re-draws
};

// Weighted Lloyd clustering of 3-vectors; returns per-point group labels,
// relabeled by order of first appearance. Used for the second stage.
std::vector<std::size_t> weighted_kmeans3(std::span<const std::array<double, 3>> points,
                                          std::span<const double> weights,
                                          std::size_t n_groups, std::uint64_t seed,
                                          std::size_t n_starts = 5);

// Picks the group count in [1, max_groups] minimizing the ratio of within- to
// between-group variance (each normalized by its degrees of freedom); a
// perfect fit (within-variance ~ 0) wins at the smallest such count.
std::size_t choose_group_count(std::span<const std::array<double, 3>> points,
                               std::span<const double> weights,
                               std::size_t max_groups, std::uint64_t seed);

// Two-stage clustering: per subset a K sweep + EM fit, then grouping of the
// pooled coefficient vectors, then per-site group assignment with
// individual-likelihood resolution of subset disagreements.
TwoStageResult cluster_by_subsets(const TriadDataset& data,
                                  std::span<const SiteScales> scales,
                                  const SubsetPlan& plan, const EmConfig& config,
                                  std::size_t k_min, std::size_t k_max);

}  // namespace triomix
