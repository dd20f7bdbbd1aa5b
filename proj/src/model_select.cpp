#include "triomix/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace triomix {

const MixtureState& KSweepResult::selected_fit() const {
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].n_clusters == selected_k && fits[i].has_value())
      return *fits[i];
  throw std::logic_error("KSweepResult: no fit stored for the selected K");
}

double bic_value(double loglik, std::size_t n_sites, std::size_t n_clusters,
                 std::size_t n_triads) {
  if (n_sites == 0 || n_clusters == 0 || n_triads == 0)
    throw std::invalid_argument("bic_value: counts must be positive");
  const double penalty =
      static_cast<double>(6 * n_sites + 4 * n_clusters - 1) *
      std::log(3.0 * static_cast<double>(n_triads) * static_cast<double>(n_sites));
  return -2.0 * loglik + penalty;
}

std::size_t count_null_clusters(std::span<const double> mixing, std::size_t n_sites) {
  const double floor = 1.0 / static_cast<double>(n_sites);
  std::size_t n = 0;
  for (double p : mixing)
    if (p < floor) ++n;
  return n;
}

std::pair<std::size_t, std::string> select_k(std::span<const BicRecord> records,
                                             double plateau_frac) {
  std::vector<const BicRecord*> ok;
  for (const BicRecord& r : records)
    if (!r.failed) ok.push_back(&r);
  if (ok.empty())
    throw std::runtime_error("select_k: every K in the sweep failed");

  // plateau candidate: smallest K whose drop to the next successful K falls
  // below plateau_frac of the largest drop; flat-from-the-start curves give
  // the first K, curves still dropping at the end give the last.
  std::size_t plateau_k = ok.back()->n_clusters;
  if (ok.size() >= 2) {
    double max_drop = 0.0;
    for (std::size_t i = 0; i + 1 < ok.size(); ++i)
      max_drop = std::max(max_drop, ok[i]->bic - ok[i + 1]->bic);
    if (max_drop <= 0.0) {
      plateau_k = ok.front()->n_clusters;
    } else {
      for (std::size_t i = 0; i + 1 < ok.size(); ++i) {
        if (ok[i]->bic - ok[i + 1]->bic < plateau_frac * max_drop) {
          plateau_k = ok[i]->n_clusters;
          break;
        }
      }
    }
  }

  // min-BIC candidate: lowest BIC among Ks without null clusters.
  bool have_minbic = false;
  std::size_t minbic_k = 0;
  double minbic = 0.0;
  for (const BicRecord* r : ok) {
    if (r->n_null_clusters > 0) continue;
    if (!have_minbic || r->bic < minbic) {
      have_minbic = true;
      minbic = r->bic;
      minbic_k = r->n_clusters;
    }
  }

  if (have_minbic && minbic_k < plateau_k) return {minbic_k, "min-bic"};
  if (have_minbic && minbic_k == plateau_k) return {plateau_k, "min-bic"};
  return {plateau_k, "plateau"};
}

KSweepResult sweep_k(const SiteWorkspace& ws, std::size_t k_min, std::size_t k_max,
                     const EmConfig& config) {
  if (k_min == 0 || k_max < k_min)
    throw std::invalid_argument("sweep_k: invalid K range");

  KSweepResult out;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    EmConfig local = config;
    local.n_clusters = k;
    BicRecord rec;
    rec.n_clusters = k;
    try {
      MixtureState fit = run_em(ws, local);
      rec.loglik = fit.loglik();
      rec.bic = bic_value(rec.loglik, ws.n_sites, k, ws.n_triads);
      rec.n_null_clusters = count_null_clusters(fit.mixing, ws.n_sites);
      out.fits.emplace_back(std::move(fit));
    } catch (const optimizer_failure&) {
      rec.failed = true;
      out.fits.emplace_back(std::nullopt);
    }
    out.records.push_back(rec);
  }
  std::tie(out.selected_k, out.selection_rule) = select_k(out.records);
  return out;
}

KSweepResult sweep_k(const TriadDataset& data, std::span<const SiteScales> scales,
                     std::size_t k_min, std::size_t k_max, const EmConfig& config) {
  const SiteWorkspace ws = SiteWorkspace::build(data, scales);
  return sweep_k(ws, k_min, k_max, config);
}

}  // namespace triomix
