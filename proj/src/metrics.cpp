#include "triomix/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "triomix/subset_cluster.hpp"

namespace triomix {

std::vector<std::size_t> hungarian_min_assignment(
    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost)
    if (row.size() != n)
      throw std::invalid_argument("hungarian_min_assignment: matrix must be square");
  if (n == 0) return {};

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

MetricsReport evaluate_clustering(std::span<const std::size_t> inferred,
                                  std::span<const std::size_t> truth,
                                  std::size_t n_true_clusters) {
  if (inferred.size() != truth.size())
    throw std::invalid_argument("evaluate_clustering: length mismatch");
  const std::size_t j_total = truth.size();

  std::size_t n_inferred = 0;
  for (std::size_t l : inferred) n_inferred = std::max(n_inferred, l + 1);
  for (std::size_t t : truth)
    if (t >= n_true_clusters)
      throw std::invalid_argument("evaluate_clustering: truth label out of range");

  std::vector<std::vector<double>> counts(n_inferred,
                                          std::vector<double>(n_true_clusters, 0.0));
  std::vector<double> true_sizes(n_true_clusters, 0.0);
  std::vector<double> inferred_sizes(n_inferred, 0.0);
  for (std::size_t j = 0; j < j_total; ++j) {
    counts[inferred[j]][truth[j]] += 1.0;
    true_sizes[truth[j]] += 1.0;
    inferred_sizes[inferred[j]] += 1.0;
  }

  // square cost matrix, padded; minimizing -count maximizes matched sites
  const std::size_t n = std::max(n_inferred, n_true_clusters);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n_inferred; ++r)
    for (std::size_t c = 0; c < n_true_clusters; ++c) cost[r][c] = -counts[r][c];
  const std::vector<std::size_t> assign = hungarian_min_assignment(cost);

  MetricsReport report;
  report.n_true_clusters = n_true_clusters;
  report.n_inferred_clusters = n_inferred;
  report.matching.assign(n_inferred, SIZE_MAX);
  std::vector<std::size_t> matched_inferred(n_true_clusters, SIZE_MAX);
  for (std::size_t r = 0; r < n_inferred; ++r) {
    if (assign[r] < n_true_clusters) {
      report.matching[r] = assign[r];
      matched_inferred[assign[r]] = r;
    }
  }

  double unmatched_total = 0.0;
  std::vector<double> unmatched_by_truth(n_true_clusters, 0.0);
  for (std::size_t r = 0; r < n_inferred; ++r) {
    if (report.matching[r] != SIZE_MAX) continue;
    unmatched_total += inferred_sizes[r];
    for (std::size_t c = 0; c < n_true_clusters; ++c)
      unmatched_by_truth[c] += counts[r][c];
  }

  for (std::size_t t = 0; t < n_true_clusters; ++t) {
    ClusterMetrics m;
    m.true_cluster = t;
    const std::size_t r = matched_inferred[t];
    const double tp = r != SIZE_MAX ? counts[r][t] : 0.0;
    m.sensitivity = true_sizes[t] > 0.0 ? tp / true_sizes[t] : 1.0;

    const double negatives = static_cast<double>(j_total) - true_sizes[t];
    // false positives: off-cluster sites captured by the matched label, plus
    // every off-cluster site that ended in an unmatched inferred cluster
    double fp = unmatched_total - unmatched_by_truth[t];
    if (r != SIZE_MAX) fp += inferred_sizes[r] - tp;
    m.specificity = negatives > 0.0 ? (negatives - fp) / negatives : 1.0;
    report.per_cluster.push_back(m);
  }
  return report;
}

std::vector<std::size_t> kmeans_baseline(const TriadDataset& data, std::size_t k,
                                         std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("kmeans_baseline: k must be positive");
  std::vector<std::array<double, 3>> points(data.n_sites);
  for (std::size_t j = 0; j < data.n_sites; ++j) {
    double mf = 0.0, mm = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < data.n_triads; ++i) {
      mf += data.father(j, i);
      mm += data.mother(j, i);
      mc += data.child(j, i);
    }
    const double n = static_cast<double>(data.n_triads);
    points[j] = {mf / n, mm / n, mc / n};
  }
  const std::vector<double> weights(data.n_sites, 1.0);
  return weighted_kmeans3(points, weights, k, seed, 10);
}

}  // namespace triomix
