#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "triomix/beta.hpp"

namespace triomix {

// Per-site, per-triad methylation values for child, mother and father.
// Matrices are site-major: value of site j, triad i sits at [j * n_triads + i].
struct TriadDataset {
  std::size_t n_triads = 0;  // I
  std::size_t n_sites = 0;   // J
  std::vector<std::string> site_ids;     // length J
  std::vector<std::string> subject_ids;  // length I (triad labels)
  std::vector<double> child_values;      // J x I
  std::vector<double> mother_values;     // J x I
  std::vector<double> father_values;     // J x I

  double child(std::size_t j, std::size_t i) const { return child_values[j * n_triads + i]; }
  double mother(std::size_t j, std::size_t i) const { return mother_values[j * n_triads + i]; }
  double father(std::size_t j, std::size_t i) const { return father_values[j * n_triads + i]; }

  std::span<const double> child_row(std::size_t j) const {
    return {child_values.data() + j * n_triads, n_triads};
  }
  std::span<const double> mother_row(std::size_t j) const {
    return {mother_values.data() + j * n_triads, n_triads};
  }
  std::span<const double> father_row(std::size_t j) const {
    return {father_values.data() + j * n_triads, n_triads};
  }

  // Throws std::invalid_argument on shape mismatch or values outside (0,1).
  void validate() const;
};

// Empirical Beta scales of one site plus the derived logit-means and the
// child precision used by the cluster model.
struct SiteScales {
  BetaScale child;
  BetaScale mother;
  BetaScale father;
  double logit_mean_child = 0.0;   // O_j
  double logit_mean_mother = 0.0;  // M_j
  double logit_mean_father = 0.0;  // F_j
  double child_precision = 0.0;    // alpha0 + beta0
};

struct SiteScalesResult {
  std::vector<SiteScales> scales;
  std::size_t n_variance_clamped = 0;  // site/role pairs that hit the clamp
};

// Moment-fit Beta scales per site and role across triads. Degenerate sites
// (zero variance in some role) raise std::invalid_argument naming the site.
SiteScalesResult compute_site_scales(const TriadDataset& data);

}  // namespace triomix
