#include "triomix/data.hpp"

#include <stdexcept>

namespace triomix {

void TriadDataset::validate() const {
  const std::size_t expect = n_sites * n_triads;
  if (child_values.size() != expect || mother_values.size() != expect ||
      father_values.size() != expect)
    throw std::invalid_argument("TriadDataset: matrix sizes do not match n_sites x n_triads");
  if (site_ids.size() != n_sites)
    throw std::invalid_argument("TriadDataset: site_ids length mismatch");
  for (const auto* m : {&child_values, &mother_values, &father_values})
    for (double v : *m)
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument("TriadDataset: value outside the open interval (0,1)");
}

SiteScalesResult compute_site_scales(const TriadDataset& data) {
  SiteScalesResult out;
  out.scales.resize(data.n_sites);

  for (std::size_t j = 0; j < data.n_sites; ++j) {
    SiteScales& s = out.scales[j];
    bool clamped = false;
    try {
      s.child = estimate_scales_from_moments(data.child_row(j), &clamped);
      if (clamped) ++out.n_variance_clamped;
      s.mother = estimate_scales_from_moments(data.mother_row(j), &clamped);
      if (clamped) ++out.n_variance_clamped;
      s.father = estimate_scales_from_moments(data.father_row(j), &clamped);
      if (clamped) ++out.n_variance_clamped;
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("site " + data.site_ids[j] + ": " + e.what());
    }
    s.logit_mean_child = s.child.logit_mean();
    s.logit_mean_mother = s.mother.logit_mean();
    s.logit_mean_father = s.father.logit_mean();
    s.child_precision = s.child.precision();
  }
  return out;
}

}  // namespace triomix
