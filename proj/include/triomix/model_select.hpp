#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triomix/em.hpp"

namespace triomix {

// One row of a BIC curve. A failed EM run leaves loglik/bic as NaN and sets
// failed; such rows stay in the curve but never win selection.
struct BicRecord {
  std::size_t n_clusters = 0;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_null_clusters = 0;
  bool failed = false;
};

struct KSweepResult {
  std::vector<BicRecord> records;                 // in requested K order
  std::size_t selected_k = 0;
  std::string selection_rule;                     // "plateau" or "min-bic"
  std::vector<std::optional<MixtureState>> fits;  // aligned with records

  const MixtureState& selected_fit() const;
};

// -2*loglik + (6*J + 4*K - 1) * log(3*I*J)
double bic_value(double loglik, std::size_t n_sites, std::size_t n_clusters,
                 std::size_t n_triads);

// Clusters with mixing proportion below 1/J hold less than one site's worth
// of mass and are treated as null.
std::size_t count_null_clusters(std::span<const double> mixing, std::size_t n_sites);

// Plateau/min-BIC selection over a computed curve. The plateau candidate is
// the smallest K whose drop to the next K falls below plateau_frac of the
// largest drop; the min-BIC candidate is the lowest-BIC K among those with no
// null clusters. The smaller of the two wins. Throws std::runtime_error if
// every record failed.
std::pair<std::size_t, std::string> select_k(std::span<const BicRecord> records,
                                             double plateau_frac = 0.05);

KSweepResult sweep_k(const TriadDataset& data, std::span<const SiteScales> scales,
                     std::size_t k_min, std::size_t k_max, const EmConfig& config);
KSweepResult sweep_k(const SiteWorkspace& ws, std::size_t k_min, std::size_t k_max,
                     const EmConfig& config);

}  // namespace triomix
