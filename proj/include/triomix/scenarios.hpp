#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triomix/data.hpp"
#include "triomix/em.hpp"

namespace triomix {

struct ClusterDef {
  ClusterCoefficients coefficients;
  std::size_t n_sites = 0;
  double neighbor_correlation = 0.0;  // lag-1 correlation of adjacent sites, 0 = independent
};

struct ScenarioSpec {
  std::string name = "custom";
  std::size_t n_triads = 0;
  std::vector<ClusterDef> clusters;
  std::string generator = "beta";  // "beta" | "truncated-normal"
  std::uint64_t seed = 0;

  std::size_t total_sites() const;
  void validate() const;
};

struct GeneratedDataset {
  TriadDataset data;
  std::vector<std::size_t> truth;  // true cluster index per site
};

// The built-in simulation configurations, all at 60 triads:
//   S0  four clusters x 500 sites
//   S1  uneven sizes (500, 600, 850, 50)
//   S2  S1 with 0.90 neighbor correlation inside clusters 1 and 2
//   S3  a fifth cluster, sizes (500, 600, 450, 50, 400)
//   S4  10,000 sites, sizes (2500, 3000, 4250, 250)
//   TN  S0 layout with truncated-normal marginals (parent mean 0.5, variance 0.25)
//   NT1 S0 layout; the zero-slope cluster plays the truly nontransmitted set
//   NT2 the two slope-carrying S0 clusters only, 500 sites each
ScenarioSpec builtin_scenario(const std::string& name, std::uint64_t seed);

GeneratedDataset generate_dataset(const ScenarioSpec& spec);

// Index of the cluster whose slope pair (gamma1, gamma2) is nearest zero:
// the fitted nontransmission cluster.
std::size_t smallest_slope_cluster(std::span<const ClusterCoefficients> coefficients);

// Index of the unique zero-slope cluster of a scenario, or SIZE_MAX if the
// scenario has none or several.
std::size_t nontransmitted_cluster(const ScenarioSpec& spec);

}  // namespace triomix
