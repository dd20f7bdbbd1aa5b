#include "triomix/subset_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "triomix/rng.hpp"

namespace triomix {

namespace {

using Point3 = std::array<double, 3>;

double sq_dist(const Point3& a, const Point3& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

SiteWorkspace gather_workspace(const SiteWorkspace& ws,
                               std::span<const std::size_t> sites) {
  SiteWorkspace sub;
  sub.n_sites = sites.size();
  sub.n_triads = ws.n_triads;
  const auto gather = [&](const std::vector<double>& src, std::vector<double>& dst) {
    dst.resize(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) dst[i] = src[sites[i]];
  };
  gather(ws.logit_mother, sub.logit_mother);
  gather(ws.logit_father, sub.logit_father);
  gather(ws.logit_child, sub.logit_child);
  gather(ws.child_precision, sub.child_precision);
  gather(ws.lgamma_phi, sub.lgamma_phi);
  gather(ws.sum_log_child, sub.sum_log_child);
  gather(ws.sum_log1m_child, sub.sum_log1m_child);
  gather(ws.parental_loglik, sub.parental_loglik);
  return sub;
}

// One Lloyd run from a seeded k-means++ start; returns labels and the
// weighted within-group sum of squares.
std::pair<std::vector<std::size_t>, double> lloyd_once(
    std::span<const Point3> points, std::span<const double> weights,
    std::size_t n_groups, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Point3> centroids;
  centroids.reserve(n_groups);

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {  // k-means++ seeding, weighted
    std::discrete_distribution<std::size_t> first(weights.begin(), weights.end());
    centroids.push_back(points[first(rng)]);
    while (centroids.size() < n_groups) {
      std::vector<double> probs(n);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], sq_dist(points[i], centroids.back()));
        probs[i] = weights[i] * d2[i];
        total += probs[i];
      }
      if (total <= 0.0) {  // fewer distinct points than groups
        centroids.push_back(points[centroids.size() % n]);
        continue;
      }
      std::discrete_distribution<std::size_t> next(probs.begin(), probs.end());
      centroids.push_back(points[next(rng)]);
    }
  }

  std::vector<std::size_t> labels(n, 0);
  for (int iter = 0; iter < 200; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double best = sq_dist(points[i], centroids[0]);
      for (std::size_t g = 1; g < n_groups; ++g) {
        const double d = sq_dist(points[i], centroids[g]);
        if (d < best) {
          best = d;
          arg = g;
        }
      }
      if (arg != labels[i]) {
        labels[i] = arg;
        changed = true;
      }
    }
    std::vector<Point3> sums(n_groups, Point3{});
    std::vector<double> mass(n_groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = labels[i];
      mass[g] += weights[i];
      for (int c = 0; c < 3; ++c) sums[g][c] += weights[i] * points[i][c];
    }
    for (std::size_t g = 0; g < n_groups; ++g) {
      if (mass[g] > 0.0) {
        for (int c = 0; c < 3; ++c) centroids[g][c] = sums[g][c] / mass[g];
      } else {
        // revive an empty group at the point farthest from its centroid
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = weights[i] * sq_dist(points[i], centroids[labels[i]]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centroids[g] = points[far];
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }

  double wss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    wss += weights[i] * sq_dist(points[i], centroids[labels[i]]);
  return {std::move(labels), wss};
}

void relabel_by_first_appearance(std::vector<std::size_t>& labels) {
  std::vector<std::size_t> remap(labels.size(), SIZE_MAX);
  std::size_t next = 0;
  for (std::size_t& l : labels) {
    if (remap[l] == SIZE_MAX) remap[l] = next++;
    l = remap[l];
  }
}

}  // namespace

double coverage_miss_pct(std::size_t n_sites, std::size_t subset_size,
                         std::size_t n_subsets) {
  const double frac =
      1.0 - static_cast<double>(subset_size) / static_cast<double>(n_sites);
  return 100.0 * std::pow(frac, static_cast<double>(n_subsets));
}

std::size_t min_subset_count(std::size_t n_sites, std::size_t subset_size,
                             double miss_budget_pct) {
  if (subset_size == 0 || subset_size > n_sites)
    throw std::invalid_argument("min_subset_count: need 0 < subset_size <= n_sites");
  if (!(miss_budget_pct > 0.0) || miss_budget_pct >= 100.0)
    throw std::invalid_argument("min_subset_count: need 0 < miss budget < 100");
  std::size_t m = 1;
  while (coverage_miss_pct(n_sites, subset_size, m) > miss_budget_pct) ++m;
  return m;
}

SubsetPlan plan_subsets_forced(std::size_t n_sites, std::size_t subset_size,
                               std::size_t n_subsets, double miss_budget_pct,
                               std::uint64_t seed) {
  if (subset_size == 0 || subset_size > n_sites)
    throw std::invalid_argument("plan_subsets: need 0 < subset_size <= n_sites");
  if (n_subsets == 0) throw std::invalid_argument("plan_subsets: need n_subsets >= 1");
  SubsetPlan plan;
  plan.n_sites = n_sites;
  plan.subset_size = subset_size;
  plan.n_subsets = n_subsets;
  plan.miss_budget_pct = miss_budget_pct;
  plan.seed = seed;
  plan.subsets.reserve(n_subsets);
  for (std::size_t s = 0; s < n_subsets; ++s) {
    Rng rng(mix_seed(seed, s));
    plan.subsets.push_back(sample_without_replacement(n_sites, subset_size, rng));
  }
  return plan;
}

SubsetPlan plan_subsets(std::size_t n_sites, std::size_t subset_size,
                        double miss_budget_pct, std::uint64_t seed) {
  return plan_subsets_forced(n_sites, subset_size,
                             min_subset_count(n_sites, subset_size, miss_budget_pct),
                             miss_budget_pct, seed);
}

std::vector<std::size_t> weighted_kmeans3(std::span<const Point3> points,
                                          std::span<const double> weights,
                                          std::size_t n_groups, std::uint64_t seed,
                                          std::size_t n_starts) {
  if (points.empty() || n_groups == 0 || weights.size() != points.size())
    throw std::invalid_argument("weighted_kmeans3: bad inputs");
  n_groups = std::min(n_groups, points.size());

  std::vector<std::size_t> best_labels;
  double best_wss = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start < n_starts; ++start) {
    Rng rng(mix_seed(seed, start));
    auto [labels, wss] = lloyd_once(points, weights, n_groups, rng);
    if (wss < best_wss) {
      best_wss = wss;
      best_labels = std::move(labels);
    }
  }
  relabel_by_first_appearance(best_labels);
  return best_labels;
}

std::size_t choose_group_count(std::span<const Point3> points,
                               std::span<const double> weights,
                               std::size_t max_groups, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("choose_group_count: no points");
  max_groups = std::min(max_groups, n);

  Point3 global{};
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass += weights[i];
    for (int c = 0; c < 3; ++c) global[c] += weights[i] * points[i][c];
  }
  for (int c = 0; c < 3; ++c) global[c] /= mass;
  double total_ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) total_ss += weights[i] * sq_dist(points[i], global);
  const double eps = 1e-12 * std::max(1.0, total_ss);

  std::size_t best_g = 1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t g = 1; g <= max_groups; ++g) {
    double w_ss = total_ss;
    if (g > 1) {
      const auto labels = weighted_kmeans3(points, weights, g, seed);
      std::vector<Point3> sums(g, Point3{});
      std::vector<double> gm(g, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        gm[labels[i]] += weights[i];
        for (int c = 0; c < 3; ++c) sums[labels[i]][c] += weights[i] * points[i][c];
      }
      w_ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Point3 cen{};
        for (int c = 0; c < 3; ++c) cen[c] = sums[labels[i]][c] / gm[labels[i]];
        w_ss += weights[i] * sq_dist(points[i], cen);
      }
    }
    double ratio;
    if (w_ss <= eps && g < n) {
      ratio = 0.0;  // perfect fit at the smallest such g
    } else if (g == 1 || g == n) {
      // a group per point always has zero within-variance; that is overfit,
      // not signal, so the full split never wins on the ratio
      ratio = std::numeric_limits<double>::infinity();
    } else {
      const double between = total_ss - w_ss;
      const double within_ms = w_ss / static_cast<double>(n - g);
      const double between_ms = between / static_cast<double>(g - 1);
      ratio = between_ms > 0.0 ? within_ms / between_ms
                               : std::numeric_limits<double>::infinity();
    }
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best_g = g;
    }
  }
  return best_g;
}

TwoStageResult cluster_by_subsets(const TriadDataset& data,
                                  std::span<const SiteScales> scales,
                                  const SubsetPlan& plan, const EmConfig& config,
                                  std::size_t k_min, std::size_t k_max) {
  if (plan.n_sites != data.n_sites)
    throw std::invalid_argument("cluster_by_subsets: plan does not match dataset");
  const SiteWorkspace ws = SiteWorkspace::build(data, scales);

  TwoStageResult out;
  std::vector<std::vector<std::size_t>> subsets = plan.subsets;
  std::vector<std::vector<std::size_t>> sub_assign(subsets.size());
  std::vector<std::size_t> gamma_offset(subsets.size());

  for (std::size_t s = 0; s < subsets.size(); ++s) {
    KSweepResult sweep;
    bool done = false;
    for (int attempt = 0; attempt < 2 && !done; ++attempt) {
      if (attempt == 1) {  // re-draw the subset once before giving up
        Rng rng(mix_seed(plan.seed, plan.n_subsets + s));
        subsets[s] = sample_without_replacement(plan.n_sites, plan.subset_size, rng);
      }
      const SiteWorkspace sub = gather_workspace(ws, subsets[s]);
      try {
        sweep = sweep_k(sub, k_min, k_max, config);
        done = true;
      } catch (const std::runtime_error&) {
        if (attempt == 1) throw;
      }
    }

    const MixtureState& fit = sweep.selected_fit();
    out.selected_k_per_subset.push_back(sweep.selected_k);
    sub_assign[s] = hard_assignments(fit);
    gamma_offset[s] = out.stage1_gammas.size();
    for (std::size_t k = 0; k < fit.n_clusters; ++k) {
      StageOneGamma g;
      g.subset_id = s;
      g.cluster_id = k;
      g.coefficients = fit.coefficients[k];
      g.size = fit.mixing[k] * static_cast<double>(fit.n_sites);
      out.stage1_gammas.push_back(g);
    }
  }

  // second stage: group the pooled coefficient vectors
  const std::size_t n_points = out.stage1_gammas.size();
  std::vector<Point3> points(n_points);
  std::vector<double> weights(n_points);
  std::size_t max_k = 2;
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto& g = out.stage1_gammas[i];
    points[i] = {g.coefficients.gamma0, g.coefficients.gamma1, g.coefficients.gamma2};
    weights[i] = std::max(g.size, 1e-12);
  }
  for (std::size_t k : out.selected_k_per_subset) max_k = std::max(max_k, k);

  const std::uint64_t stage2_seed = mix_seed(config.seed, 0x5747u);
  std::vector<std::size_t> group_of_gamma(n_points, 0);
  if (subsets.size() == 1) {
    // nothing to reconcile: the stage-1 clusters are the final groups, which
    // makes a single all-site subset reproduce the direct fit exactly
    std::iota(group_of_gamma.begin(), group_of_gamma.end(), 0);
  } else {
    const std::size_t n_groups =
        choose_group_count(points, weights, std::min(n_points, max_k + 2), stage2_seed);
    if (n_groups > 1)
      group_of_gamma = weighted_kmeans3(points, weights, n_groups, stage2_seed);
  }
  out.n_groups = 1 + *std::max_element(group_of_gamma.begin(), group_of_gamma.end());

  out.final_coefficients.assign(out.n_groups, {});
  {
    std::vector<Point3> sums(out.n_groups, Point3{});
    std::vector<double> mass(out.n_groups, 0.0);
    for (std::size_t i = 0; i < n_points; ++i) {
      mass[group_of_gamma[i]] += weights[i];
      for (int c = 0; c < 3; ++c) sums[group_of_gamma[i]][c] += weights[i] * points[i][c];
    }
    for (std::size_t g = 0; g < out.n_groups; ++g)
      out.final_coefficients[g] = {sums[g][0] / mass[g], sums[g][1] / mass[g],
                                   sums[g][2] / mass[g]};
  }

  // per-site votes: the group of the site's stage-1 cluster in each subset
  std::vector<std::vector<std::size_t>> votes(plan.n_sites);
  for (std::size_t s = 0; s < subsets.size(); ++s)
    for (std::size_t pos = 0; pos < subsets[s].size(); ++pos) {
      const std::size_t site = subsets[s][pos];
      const std::size_t group = group_of_gamma[gamma_offset[s] + sub_assign[s][pos]];
      votes[site].push_back(group);
    }

  out.final_assignments.assign(plan.n_sites, 0);
  out.post_hoc.assign(plan.n_sites, false);
  for (std::size_t j = 0; j < plan.n_sites; ++j) {
    auto& v = votes[j];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    if (v.size() == 1) {
      out.final_assignments[j] = v[0];
      continue;
    }
    // no vote: site never covered; several votes: subsets disagree. Either
    // way the site goes to the candidate group with the best individual fit.
    std::span<const std::size_t> candidates;
    std::vector<std::size_t> all;
    if (v.empty()) {
      out.post_hoc[j] = true;
      all.resize(out.n_groups);
      std::iota(all.begin(), all.end(), 0);
      candidates = all;
    } else {
      ++out.conflicts_resolved;
      candidates = v;
    }
    std::size_t arg = candidates[0];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g : candidates) {
      const double ll = site_cluster_loglik(j, out.final_coefficients[g], data, scales);
      if (ll > best) {
        best = ll;
        arg = g;
      }
    }
    out.final_assignments[j] = arg;
  }
  out.stage1_groups = std::move(group_of_gamma);
  out.subsets_used = std::move(subsets);
  return out;
}

}  // namespace triomix
