#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "support.hpp"
#include "triomix/model_select.hpp"

using namespace triomix;

namespace {

BicRecord rec(std::size_t k, double bic, std::size_t nulls = 0, bool failed = false) {
  BicRecord r;
  r.n_clusters = k;
  r.bic = bic;
  r.loglik = -0.5 * bic;  // arbitrary but consistent
  r.n_null_clusters = nulls;
  r.failed = failed;
  return r;
}

}  // namespace

TEST_CASE("bic value spot checks") {
  // J=1, K=1, I=1: penalty (6+4-1) * log 3
  CHECK(bic_value(0.0, 1, 1, 1) == doctest::Approx(9.0 * std::log(3.0)).epsilon(1e-14));
  // J=3, K=2, I=3: -2*(-100) + (18+8-1) * log 27 = 200 + 75 log 3
  CHECK(bic_value(-100.0, 3, 2, 3) ==
        doctest::Approx(200.0 + 75.0 * std::log(3.0)).epsilon(1e-13));
  CHECK_THROWS_AS(bic_value(0.0, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(bic_value(0.0, 1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(bic_value(0.0, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("null cluster counting uses the one-site floor") {
  const std::vector<double> mixing{0.5, 0.495, 0.005};
  CHECK(count_null_clusters(mixing, 100) == 1);   // floor 0.01
  CHECK(count_null_clusters(mixing, 1000) == 0);  // floor 0.001
  const std::vector<double> boundary{0.01, 0.99};
  CHECK(count_null_clusters(boundary, 100) == 0);  // exactly at the floor is kept
}

TEST_CASE("selection prefers the flattening point of a steep curve") {
  const std::vector<BicRecord> records{rec(2, 1000), rec(3, 500), rec(4, 499.9),
                                       rec(5, 499.8), rec(6, 499.7)};
  const auto [k, rule] = select_k(records);
  CHECK(k == 3);
  CHECK(rule == "plateau");
}

TEST_CASE("a null cluster blocks the min-bic candidate") {
  // lowest BIC sits at K=4 but that fit has a collapsed cluster
  std::vector<BicRecord> records{rec(2, 1000), rec(3, 400), rec(4, 300, 1),
                                 rec(5, 350), rec(6, 500)};
  {
    const auto [k, rule] = select_k(records);
    CHECK(k == 4);  // plateau candidate (bic rises after K=4)
    CHECK(rule == "plateau");
  }
  records[2].n_null_clusters = 0;  // healthy K=4 makes it the min-bic winner
  {
    const auto [k, rule] = select_k(records);
    CHECK(k == 4);
    CHECK(rule == "min-bic");
  }
}

TEST_CASE("null clusters can steer selection to a smaller K") {
  const std::vector<BicRecord> records{rec(2, 1000), rec(3, 500, 1), rec(4, 495, 1),
                                       rec(5, 490, 1), rec(6, 485, 1)};
  const auto [k, rule] = select_k(records);
  CHECK(k == 2);
  CHECK(rule == "min-bic");
}

TEST_CASE("a curve still dropping at the end selects the last K") {
  const std::vector<BicRecord> records{rec(2, 1000), rec(3, 800), rec(4, 600),
                                       rec(5, 400), rec(6, 200)};
  const auto [k, rule] = select_k(records);
  CHECK(k == 6);

  // same shape but every fit has a null cluster: plateau rule alone applies
  std::vector<BicRecord> nulls = records;
  for (auto& r : nulls) r.n_null_clusters = 1;
  const auto [k2, rule2] = select_k(nulls);
  CHECK(k2 == 6);
  CHECK(rule2 == "plateau");
}

TEST_CASE("a non-decreasing curve selects the first K") {
  const std::vector<BicRecord> records{rec(2, 100), rec(3, 200), rec(4, 300)};
  const auto [k, rule] = select_k(records);
  CHECK(k == 2);
}

TEST_CASE("failed sweeps are skipped, not selected") {
  const std::vector<BicRecord> records{rec(2, 0, 0, true), rec(3, 1000), rec(4, 400),
                                       rec(5, 399), rec(6, 398)};
  const auto [k, rule] = select_k(records);
  CHECK(k == 4);
  CHECK(rule == "plateau");

  const std::vector<BicRecord> lone{rec(2, 0, 0, true), rec(4, 123)};
  CHECK(select_k(lone).first == 4);

  const std::vector<BicRecord> all_failed{rec(2, 0, 0, true), rec(3, 0, 0, true)};
  CHECK_THROWS_AS(select_k(all_failed), std::runtime_error);
}

TEST_CASE("sweep records are internally consistent") {
  const auto gen = testsupport::two_cluster_data(30, 12, 404);
  const auto scales = compute_site_scales(gen.data).scales;
  EmConfig cfg;
  cfg.n_restarts = 2;
  cfg.seed = 9;
  const KSweepResult sweep = sweep_k(gen.data, scales, 2, 4, cfg);

  REQUIRE(sweep.records.size() == 3);
  REQUIRE(sweep.fits.size() == 3);
  for (std::size_t i = 0; i < sweep.records.size(); ++i) {
    const BicRecord& r = sweep.records[i];
    CHECK(r.n_clusters == i + 2);
    REQUIRE(!r.failed);
    REQUIRE(sweep.fits[i].has_value());
    CHECK(sweep.fits[i]->n_clusters == r.n_clusters);
    CHECK(r.loglik == sweep.fits[i]->loglik());
    CHECK(r.bic == bic_value(r.loglik, gen.data.n_sites, r.n_clusters, gen.data.n_triads));
    CHECK(r.n_null_clusters ==
          count_null_clusters(sweep.fits[i]->mixing, gen.data.n_sites));
  }
  const auto [k, rule] = select_k(sweep.records);
  CHECK(sweep.selected_k == k);
  CHECK(sweep.selection_rule == rule);
  CHECK(sweep.selected_fit().n_clusters == sweep.selected_k);

  CHECK_THROWS_AS(sweep_k(gen.data, scales, 0, 3, cfg), std::invalid_argument);
  CHECK_THROWS_AS(sweep_k(gen.data, scales, 4, 2, cfg), std::invalid_argument);
}

TEST_CASE("selected_fit demands a stored fit") {
  KSweepResult sweep;
  sweep.records = {rec(2, 10.0)};
  sweep.fits.emplace_back(std::nullopt);
  sweep.selected_k = 2;
  CHECK_THROWS_AS(sweep.selected_fit(), std::logic_error);
}
