#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "support.hpp"
#include "triomix/metrics.hpp"
#include "triomix/subset_cluster.hpp"

using namespace triomix;

TEST_CASE("coverage shrinks geometrically with the subset count") {
  // J=4063, S=2000: seven subsets push the expected miss under 1%
  CHECK(min_subset_count(4063, 2000, 1.0) == 7);
  CHECK(coverage_miss_pct(4063, 2000, 6) > 1.0);
  CHECK(coverage_miss_pct(4063, 2000, 7) <= 1.0);
  CHECK(coverage_miss_pct(4063, 2000, 15) == doctest::Approx(0.00385).epsilon(0.01));

  // closed-form cross-check at round numbers: (1/2)^3 = 12.5%
  CHECK(coverage_miss_pct(100, 50, 3) == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(min_subset_count(100, 100, 1.0) == 1);  // full coverage in one subset

  CHECK_THROWS_AS(min_subset_count(100, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(min_subset_count(100, 101, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(min_subset_count(100, 50, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(min_subset_count(100, 50, 100.0), std::invalid_argument);
}

TEST_CASE("plans hold sorted, distinct, in-range subsets") {
  const SubsetPlan plan = plan_subsets(100, 30, 5.0, 1);
  CHECK(plan.n_subsets == 9);  // smallest m with 100 * 0.7^m <= 5
  REQUIRE(plan.subsets.size() == 9);
  for (const auto& subset : plan.subsets) {
    REQUIRE(subset.size() == 30);
    CHECK(std::is_sorted(subset.begin(), subset.end()));
    CHECK(std::adjacent_find(subset.begin(), subset.end()) == subset.end());
    CHECK(subset.back() < 100);
  }

  const SubsetPlan again = plan_subsets(100, 30, 5.0, 1);
  CHECK(again.subsets == plan.subsets);
  const SubsetPlan other = plan_subsets(100, 30, 5.0, 2);
  CHECK(other.subsets != plan.subsets);

  CHECK(plan_subsets_forced(50, 10, 3, 1.0, 0).n_subsets == 3);
}

TEST_CASE("weighted k-means separates distinct clouds") {
  const std::vector<std::array<double, 3>> points{
      {0.0, 0.0, 0.0},  {0.1, 0.0, 0.0},  {0.0, 0.1, 0.0},
      {5.0, 5.0, 5.0},  {5.1, 5.0, 5.0},  {5.0, 5.1, 5.0},
      {-5.0, 5.0, 0.0}, {-5.1, 5.0, 0.0}, {-5.0, 5.1, 0.0}};
  const std::vector<double> weights(points.size(), 1.0);

  const auto labels = weighted_kmeans3(points, weights, 3, 7);
  // relabeling by first appearance pins the cloud order
  CHECK(labels == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 2, 2, 2});

  CHECK(choose_group_count(points, weights, 6, 7) == 3);
}

TEST_CASE("group count collapses for duplicated points") {
  const std::vector<std::array<double, 3>> pairs{
      {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  const std::vector<double> w4(4, 1.0);
  CHECK(choose_group_count(pairs, w4, 4, 1) == 2);

  const std::vector<std::array<double, 3>> same{
      {0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}};
  const std::vector<double> w3(3, 1.0);
  CHECK(choose_group_count(same, w3, 3, 1) == 1);
}

TEST_CASE("a single all-site subset reproduces the direct fit") {
  const auto gen = testsupport::two_cluster_data(40, 10, 606);
  const auto scales = compute_site_scales(gen.data).scales;
  EmConfig cfg;
  cfg.n_restarts = 2;
  cfg.seed = 11;

  const SubsetPlan plan = plan_subsets(gen.data.n_sites, gen.data.n_sites, 1.0, 5);
  REQUIRE(plan.n_subsets == 1);
  std::vector<std::size_t> identity(gen.data.n_sites);
  std::iota(identity.begin(), identity.end(), 0);
  REQUIRE(plan.subsets[0] == identity);

  const KSweepResult direct = sweep_k(gen.data, scales, 2, 3, cfg);
  const TwoStageResult res = cluster_by_subsets(gen.data, scales, plan, cfg, 2, 3);

  CHECK(res.selected_k_per_subset == std::vector<std::size_t>{direct.selected_k});
  CHECK(res.n_groups == direct.selected_k);
  CHECK(res.final_assignments == hard_assignments(direct.selected_fit()));
  CHECK(res.conflicts_resolved == 0);
  for (bool flag : res.post_hoc) CHECK(!flag);
  CHECK(res.subsets_used == plan.subsets);

  REQUIRE(res.stage1_gammas.size() == direct.selected_k);
  for (std::size_t k = 0; k < direct.selected_k; ++k) {
    const auto& fit = direct.selected_fit().coefficients[k];
    CHECK(res.final_coefficients[k].gamma0 == doctest::Approx(fit.gamma0).epsilon(1e-9));
    CHECK(res.final_coefficients[k].gamma1 == doctest::Approx(fit.gamma1).epsilon(1e-9));
    CHECK(res.final_coefficients[k].gamma2 == doctest::Approx(fit.gamma2).epsilon(1e-9));
  }
}

TEST_CASE("overlapping subsets recover the truth and flag uncovered sites") {
  const auto gen = testsupport::two_cluster_data(60, 10, 707);
  const auto scales = compute_site_scales(gen.data).scales;
  const std::size_t n = gen.data.n_sites;  // 120

  // hand-built plan: sites 39..79 are covered twice, site 119 never
  SubsetPlan plan;
  plan.n_sites = n;
  plan.subset_size = 80;
  plan.n_subsets = 2;
  plan.miss_budget_pct = 50.0;
  plan.seed = 0;
  plan.subsets.resize(2);
  for (std::size_t j = 0; j < 80; ++j) plan.subsets[0].push_back(j);
  for (std::size_t j = 39; j < 119; ++j) plan.subsets[1].push_back(j);

  EmConfig cfg;
  cfg.n_restarts = 2;
  cfg.seed = 4;
  const TwoStageResult res = cluster_by_subsets(gen.data, scales, plan, cfg, 2, 2);

  CHECK(res.selected_k_per_subset == std::vector<std::size_t>{2, 2});
  CHECK(res.n_groups == 2);
  CHECK(res.stage1_gammas.size() == 4);
  CHECK(res.stage1_groups.size() == 4);
  CHECK(res.subsets_used == plan.subsets);

  for (std::size_t j = 0; j < n; ++j) CHECK(res.post_hoc[j] == (j == 119));
  CHECK(res.conflicts_resolved <= 41);  // only twice-covered sites can disagree

  // the uncovered site goes to whichever group fits it best individually
  std::size_t best_g = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < res.n_groups; ++g) {
    const double ll = site_cluster_loglik(119, res.final_coefficients[g], gen.data, scales);
    if (ll > best) {
      best = ll;
      best_g = g;
    }
  }
  CHECK(res.final_assignments[119] == best_g);

  const MetricsReport report = evaluate_clustering(res.final_assignments, gen.truth, 2);
  CHECK(report.sensitivity(0) >= 0.9);
  CHECK(report.sensitivity(1) >= 0.9);
}

TEST_CASE("plans must match the dataset") {
  const auto gen = testsupport::two_cluster_data(10, 8, 13);
  const auto scales = compute_site_scales(gen.data).scales;
  const SubsetPlan plan = plan_subsets(50, 25, 1.0, 0);  // wrong J
  EmConfig cfg;
  CHECK_THROWS_AS(cluster_by_subsets(gen.data, scales, plan, cfg, 2, 2),
                  std::invalid_argument);
}
