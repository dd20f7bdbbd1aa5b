#pragma once

// Small dataset builders shared by the test binaries.

#include <cstdint>
#include <vector>

#include "triomix/data.hpp"
#include "triomix/scenarios.hpp"

namespace testsupport {

inline triomix::ScenarioSpec custom_spec(std::vector<triomix::ClusterDef> clusters,
                                         std::size_t n_triads, std::uint64_t seed,
                                         std::string generator = "beta") {
  triomix::ScenarioSpec spec;
  spec.name = "custom";
  spec.n_triads = n_triads;
  spec.clusters = std::move(clusters);
  spec.generator = std::move(generator);
  spec.seed = seed;
  return spec;
}

// Two well-separated transmission patterns; enough sites to keep the EM happy
// but small enough for fast tests.
inline triomix::GeneratedDataset two_cluster_data(std::size_t sites_per_cluster,
                                                  std::size_t n_triads,
                                                  std::uint64_t seed) {
  return triomix::generate_dataset(custom_spec(
      {
          {{-0.5, 1.6, 0.0}, sites_per_cluster, 0.0},
          {{1.0, 0.0, -1.4}, sites_per_cluster, 0.0},
      },
      n_triads, seed));
}

}  // namespace testsupport
