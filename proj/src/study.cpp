#include "triomix/study.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "triomix/model_select.hpp"
#include "triomix/rng.hpp"

namespace triomix {

namespace {

Aggregate aggregate_of(const std::vector<double>& values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(a.n);
  if (a.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

template <typename Selector>
Aggregate over_replicates(const std::vector<ReplicateOutcome>& reps, Selector&& sel) {
  std::vector<double> values;
  for (const ReplicateOutcome& r : reps) {
    if (r.failed) continue;
    const double v = sel(r);
    if (std::isfinite(v)) values.push_back(v);
  }
  return aggregate_of(values);
}

}  // namespace

std::map<std::size_t, std::size_t> StudyReport::k_frequency() const {
  std::map<std::size_t, std::size_t> freq;
  for (const ReplicateOutcome& r : replicates)
    if (!r.failed) ++freq[r.selected_k];
  return freq;
}

double StudyReport::selection_rate(std::size_t k) const {
  std::size_t ok = 0, hit = 0;
  for (const ReplicateOutcome& r : replicates) {
    if (r.failed) continue;
    ++ok;
    if (r.selected_k == k) ++hit;
  }
  return ok > 0 ? static_cast<double>(hit) / static_cast<double>(ok) : 0.0;
}

std::size_t StudyReport::n_failed() const {
  std::size_t n = 0;
  for (const ReplicateOutcome& r : replicates)
    if (r.failed) ++n;
  return n;
}

Aggregate StudyReport::em_sensitivity(std::size_t cluster, bool at_true_k) const {
  return over_replicates(replicates, [&](const ReplicateOutcome& r) {
    return (at_true_k ? r.em_true_k_report : r.em_report).sensitivity(cluster);
  });
}

Aggregate StudyReport::em_specificity(std::size_t cluster, bool at_true_k) const {
  return over_replicates(replicates, [&](const ReplicateOutcome& r) {
    return (at_true_k ? r.em_true_k_report : r.em_report).specificity(cluster);
  });
}

Aggregate StudyReport::kmeans_sensitivity(std::size_t cluster) const {
  return over_replicates(replicates, [&](const ReplicateOutcome& r) {
    return r.kmeans_report.sensitivity(cluster);
  });
}

Aggregate StudyReport::kmeans_specificity(std::size_t cluster) const {
  return over_replicates(replicates, [&](const ReplicateOutcome& r) {
    return r.kmeans_report.specificity(cluster);
  });
}

Aggregate StudyReport::capture_rate() const {
  return over_replicates(
      replicates, [](const ReplicateOutcome& r) { return r.nontransmission_capture; });
}

StudyReport run_mc_study(const ScenarioSpec& spec, std::size_t n_replicates,
                         std::size_t k_min, std::size_t k_max, const EmConfig& config) {
  spec.validate();
  if (n_replicates == 0)
    throw std::invalid_argument("run_mc_study: need at least one replicate");
  const std::size_t true_k = spec.clusters.size();
  const std::size_t nt = nontransmitted_cluster(spec);

  StudyReport report;
  report.scenario = spec;
  report.k_min = k_min;
  report.k_max = k_max;

  for (std::size_t r = 0; r < n_replicates; ++r) {
    ReplicateOutcome out;
    out.replicate = r;
    try {
      ScenarioSpec rep_spec = spec;
      rep_spec.seed = mix_seed(spec.seed, r);
      const GeneratedDataset gen = generate_dataset(rep_spec);
      const SiteScalesResult scales = compute_site_scales(gen.data);
      const SiteWorkspace ws = SiteWorkspace::build(gen.data, scales.scales);

      EmConfig cfg = config;
      cfg.seed = mix_seed(config.seed, r);

      const KSweepResult sweep = sweep_k(ws, k_min, k_max, cfg);
      out.selected_k = sweep.selected_k;
      const MixtureState& selected = sweep.selected_fit();
      out.em_report =
          evaluate_clustering(hard_assignments(selected), gen.truth, true_k);
      out.em_report.selected_k = sweep.selected_k;

      // the true-K fit usually falls out of the sweep; refit only if not
      const MixtureState* at_true = nullptr;
      MixtureState refit;
      for (std::size_t i = 0; i < sweep.records.size(); ++i)
        if (sweep.records[i].n_clusters == true_k && sweep.fits[i].has_value())
          at_true = &*sweep.fits[i];
      if (at_true == nullptr) {
        EmConfig tcfg = cfg;
        tcfg.n_clusters = true_k;
        refit = run_em(ws, tcfg);
        at_true = &refit;
      }
      out.em_true_k_report =
          evaluate_clustering(hard_assignments(*at_true), gen.truth, true_k);

      const auto baseline =
          kmeans_baseline(gen.data, true_k, mix_seed(cfg.seed, 0x6b6du));
      out.kmeans_report = evaluate_clustering(baseline, gen.truth, true_k);

      if (nt != SIZE_MAX) {
        const std::size_t zero_k = smallest_slope_cluster(selected.coefficients);
        const auto assigned = hard_assignments(selected);
        std::size_t total = 0, captured = 0;
        for (std::size_t j = 0; j < gen.truth.size(); ++j) {
          if (gen.truth[j] != nt) continue;
          ++total;
          if (assigned[j] == zero_k) ++captured;
        }
        if (total > 0)
          out.nontransmission_capture =
              static_cast<double>(captured) / static_cast<double>(total);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
    report.replicates.push_back(std::move(out));
  }
  return report;
}

namespace {

TriadDataset resample_triads(const TriadDataset& data,
                             std::span<const std::size_t> idx) {
  TriadDataset out;
  out.n_sites = data.n_sites;
  out.n_triads = idx.size();
  out.site_ids = data.site_ids;
  out.subject_ids.reserve(idx.size());
  for (std::size_t i : idx) out.subject_ids.push_back(data.subject_ids[i]);
  out.child_values.resize(out.n_sites * out.n_triads);
  out.mother_values.resize(out.n_sites * out.n_triads);
  out.father_values.resize(out.n_sites * out.n_triads);
  for (std::size_t j = 0; j < out.n_sites; ++j)
    for (std::size_t p = 0; p < idx.size(); ++p) {
      out.child_values[j * out.n_triads + p] = data.child(j, idx[p]);
      out.mother_values[j * out.n_triads + p] = data.mother(j, idx[p]);
      out.father_values[j * out.n_triads + p] = data.father(j, idx[p]);
    }
  return out;
}

}  // namespace

BootstrapResult bootstrap_se(const TriadDataset& data,
                             std::span<const std::size_t> assignments,
                             std::span<const ClusterCoefficients> point_coefficients,
                             const std::vector<std::vector<std::size_t>>& index_sets) {
  const std::size_t n_clusters = point_coefficients.size();
  if (assignments.size() != data.n_sites)
    throw std::invalid_argument("bootstrap_se: assignments length mismatch");
  for (std::size_t a : assignments)
    if (a >= n_clusters)
      throw std::invalid_argument("bootstrap_se: assignment label out of range");

  BootstrapResult result;
  result.n_reps = index_sets.size();
  std::vector<std::vector<std::array<double, 3>>> draws;  // per rep: K gammas

  for (const auto& idx : index_sets) {
    if (idx.size() < 2)
      throw std::invalid_argument("bootstrap_se: resample needs at least two triads");
    for (std::size_t i : idx)
      if (i >= data.n_triads)
        throw std::invalid_argument("bootstrap_se: triad index out of range");

    try {
      const TriadDataset res = resample_triads(data, idx);
      const SiteScalesResult scales = compute_site_scales(res);
      const SiteWorkspace ws = SiteWorkspace::build(res, scales.scales);

      MixtureState state;
      state.n_sites = res.n_sites;
      state.n_clusters = n_clusters;
      state.coefficients.assign(point_coefficients.begin(), point_coefficients.end());
      state.mixing.assign(n_clusters, 0.0);
      state.responsibilities.assign(res.n_sites * n_clusters, 0.0);
      for (std::size_t j = 0; j < res.n_sites; ++j) {
        state.responsibilities[j * n_clusters + assignments[j]] = 1.0;
        state.mixing[assignments[j]] += 1.0 / static_cast<double>(res.n_sites);
      }
      const auto refit = m_step_gamma(state, ws);
      std::vector<std::array<double, 3>> g(n_clusters);
      for (std::size_t k = 0; k < n_clusters; ++k)
        g[k] = {refit[k].gamma0, refit[k].gamma1, refit[k].gamma2};
      draws.push_back(std::move(g));
    } catch (const std::invalid_argument&) {
      ++result.n_skipped;  // a site went constant in this resample
    } catch (const optimizer_failure&) {
      ++result.n_skipped;
    }
  }

  result.n_used = draws.size();
  result.coefficient_se.assign(n_clusters, {0.0, 0.0, 0.0});
  if (result.n_used >= 2) {
    const double n = static_cast<double>(result.n_used);
    for (std::size_t k = 0; k < n_clusters; ++k)
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const auto& d : draws) mean += d[k][c];
        mean /= n;
        double ss = 0.0;
        for (const auto& d : draws) ss += (d[k][c] - mean) * (d[k][c] - mean);
        result.coefficient_se[k][c] = std::sqrt(ss / (n - 1.0));
      }
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.coefficient_se.assign(n_clusters, {nan, nan, nan});
  }
  return result;
}

BootstrapResult bootstrap_se(const TriadDataset& data,
                             std::span<const std::size_t> assignments,
                             std::span<const ClusterCoefficients> point_coefficients,
                             std::size_t n_reps, std::uint64_t seed) {
  if (n_reps < 2) throw std::invalid_argument("bootstrap_se: need n_reps >= 2");
  std::vector<std::vector<std::size_t>> index_sets(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    Rng rng(mix_seed(seed, r));
    std::uniform_int_distribution<std::size_t> pick(0, data.n_triads - 1);
    index_sets[r].reserve(data.n_triads);
    for (std::size_t i = 0; i < data.n_triads; ++i) index_sets[r].push_back(pick(rng));
  }
  return bootstrap_se(data, assignments, point_coefficients, index_sets);
}

}  // namespace triomix
