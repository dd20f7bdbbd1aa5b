#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "triomix/data.hpp"

namespace triomix {

struct ClusterMetrics {
  std::size_t true_cluster = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct MetricsReport {
  std::vector<ClusterMetrics> per_cluster;      // one entry per true cluster
  std::vector<std::size_t> matching;            // inferred -> true, SIZE_MAX = unmatched
  std::size_t n_true_clusters = 0;
  std::size_t n_inferred_clusters = 0;
  std::size_t selected_k = 0;  // filled by study drivers, 0 when not applicable

  double sensitivity(std::size_t true_cluster) const {
    return per_cluster[true_cluster].sensitivity;
  }
  double specificity(std::size_t true_cluster) const {
    return per_cluster[true_cluster].specificity;
  }
};

// Minimum-cost perfect assignment on a square cost matrix (O(n^3) augmenting
// paths); returns the column chosen for each row.
std::vector<std::size_t> hungarian_min_assignment(
    const std::vector<std::vector<double>>& cost);

// One-vs-rest sensitivity and specificity per true cluster after matching
// inferred labels to true labels so that the matched site count is maximal.
// Sites of unmatched inferred clusters count as false positives against every
// true cluster; an unmatched true cluster has sensitivity 0.
MetricsReport evaluate_clustering(std::span<const std::size_t> inferred,
                                  std::span<const std::size_t> truth,
                                  std::size_t n_true_clusters);

// Lloyd clustering of the per-site mean methylation triples
// (father, mother, child) with seeded multi-start; the comparison baseline.
std::vector<std::size_t> kmeans_baseline(const TriadDataset& data, std::size_t k,
                                         std::uint64_t seed);

}  // namespace triomix
