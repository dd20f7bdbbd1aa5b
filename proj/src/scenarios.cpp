#include "triomix/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "triomix/beta.hpp"
#include "triomix/rng.hpp"

namespace triomix {

namespace {

constexpr double kMeanLo = 0.15;
constexpr double kMeanHi = 0.85;
constexpr double kPrecLo = 5.0;
constexpr double kPrecHi = 50.0;

double sample_beta(const BetaScale& scale, Rng& rng) {
  std::gamma_distribution<double> ga(scale.alpha, 1.0);
  std::gamma_distribution<double> gb(scale.beta, 1.0);
  const double a = ga(rng);
  const double b = gb(rng);
  const double x = (a + b) > 0.0 ? a / (a + b) : 0.5;
  return clip_unit(x).first;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse CDF of the site's Beta marginal, for the copula transform.
double beta_quantile(const BetaScale& scale, double u) {
  u = std::min(std::max(u, 1e-15), 1.0 - 1e-15);
  return clip_unit(boost::math::ibeta_inv(scale.alpha, scale.beta, u)).first;
}

// Mean-0.5ish normal restricted to (0,1) by rejection.
double sample_truncated_normal(double mean, double sd, Rng& rng) {
  std::normal_distribution<double> n(mean, sd);
  for (int tries = 0; tries < 100000; ++tries) {
    const double x = n(rng);
    if (x > 0.0 && x < 1.0) return clip_unit(x).first;
  }
  throw std::runtime_error("truncated normal rejection sampler failed to accept");
}

BetaScale random_scale(Rng& rng) {
  std::uniform_real_distribution<double> mean(kMeanLo, kMeanHi);
  std::uniform_real_distribution<double> prec(kPrecLo, kPrecHi);
  return BetaScale::from_mean_precision(mean(rng), prec(rng));
}

struct RoleChain {
  // previous site's latent normals, one per triad, for the copula chain
  std::vector<double> z;
  bool started = false;
};

void generate_cluster_beta(const ClusterDef& def, std::size_t n_triads, Rng& rng,
                           std::vector<double>& mother, std::vector<double>& father,
                           std::vector<double>& child) {
  const double rho = def.neighbor_correlation;
  const double resid = std::sqrt(1.0 - rho * rho);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_real_distribution<double> prec(kPrecLo, kPrecHi);

  RoleChain chain_m, chain_f, chain_c;
  chain_m.z.resize(n_triads);
  chain_f.z.resize(n_triads);
  chain_c.z.resize(n_triads);

  for (std::size_t j = 0; j < def.n_sites; ++j) {
    const BetaScale mscale = random_scale(rng);
    const BetaScale fscale = random_scale(rng);
    const double mu = inverse_logit(
        def.coefficients.eta(logit(mscale.mean()), logit(fscale.mean())));
    const BetaScale cscale = BetaScale::from_mean_precision(
        std::min(std::max(mu, kUnitClip), 1.0 - kUnitClip), prec(rng));

    const auto emit = [&](const BetaScale& scale, RoleChain& chain,
                          std::vector<double>& out) {
      for (std::size_t i = 0; i < n_triads; ++i) {
        if (rho == 0.0) {
          out.push_back(sample_beta(scale, rng));
        } else {
          const double fresh = stdnorm(rng);
          const double z = chain.started ? rho * chain.z[i] + resid * fresh : fresh;
          chain.z[i] = z;
          out.push_back(beta_quantile(scale, normal_cdf(z)));
        }
      }
      chain.started = true;
    };
    emit(mscale, chain_m, mother);
    emit(fscale, chain_f, father);
    emit(cscale, chain_c, child);
  }
}

void generate_cluster_truncated_normal(const ClusterDef& def, std::size_t n_triads,
                                       Rng& rng, std::vector<double>& mother,
                                       std::vector<double>& father,
                                       std::vector<double>& child) {
  const double sd = 0.5;  // pre-truncation variance 0.25
  const double parent_mean = 0.5;
  const double mu = inverse_logit(
      def.coefficients.eta(logit(parent_mean), logit(parent_mean)));
  for (std::size_t j = 0; j < def.n_sites; ++j) {
    for (std::size_t i = 0; i < n_triads; ++i)
      mother.push_back(sample_truncated_normal(parent_mean, sd, rng));
    for (std::size_t i = 0; i < n_triads; ++i)
      father.push_back(sample_truncated_normal(parent_mean, sd, rng));
    for (std::size_t i = 0; i < n_triads; ++i)
      child.push_back(sample_truncated_normal(mu, sd, rng));
  }
}

std::vector<ClusterDef> s0_clusters() {
  return {{{-4.2, 0.0, 1.3}, 500},
          {{-0.7, 1.9, 0.0}, 500},
          {{-2.3, 0.0, 0.0}, 500},
          {{1.4, -1.5, -0.6}, 500}};
}

}  // namespace

std::size_t ScenarioSpec::total_sites() const {
  std::size_t j = 0;
  for (const ClusterDef& c : clusters) j += c.n_sites;
  return j;
}

void ScenarioSpec::validate() const {
  if (n_triads == 0) throw std::invalid_argument("scenario: n_triads must be positive");
  if (clusters.empty()) throw std::invalid_argument("scenario: no clusters");
  if (total_sites() == 0) throw std::invalid_argument("scenario: no sites");
  for (const ClusterDef& c : clusters)
    if (c.neighbor_correlation < 0.0 || c.neighbor_correlation >= 1.0)
      throw std::invalid_argument("scenario: neighbor correlation must lie in [0,1)");
  if (generator != "beta" && generator != "truncated-normal")
    throw std::invalid_argument("scenario: unknown generator '" + generator + "'");
  if (generator == "truncated-normal")
    for (const ClusterDef& c : clusters)
      if (c.neighbor_correlation != 0.0)
        throw std::invalid_argument(
            "scenario: neighbor correlation is only supported for the beta generator");
}

ScenarioSpec builtin_scenario(const std::string& name, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.name = name;
  spec.n_triads = 60;
  spec.seed = seed;
  spec.clusters = s0_clusters();

  if (name == "S0" || name == "NT1") {
    // NT1 shares the S0 layout; its zero-slope cluster is the truly
    // nontransmitted set that the fit is expected to capture.
  } else if (name == "S1" || name == "S2") {
    const std::size_t sizes[] = {500, 600, 850, 50};
    for (std::size_t c = 0; c < 4; ++c) spec.clusters[c].n_sites = sizes[c];
    if (name == "S2") {
      spec.clusters[0].neighbor_correlation = 0.90;
      spec.clusters[1].neighbor_correlation = 0.90;
    }
  } else if (name == "S3") {
    const std::size_t sizes[] = {500, 600, 450, 50};
    for (std::size_t c = 0; c < 4; ++c) spec.clusters[c].n_sites = sizes[c];
    spec.clusters.push_back({{-3.0, 2.0, 2.0}, 400});
  } else if (name == "S4") {
    const std::size_t sizes[] = {2500, 3000, 4250, 250};
    for (std::size_t c = 0; c < 4; ++c) spec.clusters[c].n_sites = sizes[c];
  } else if (name == "TN") {
    spec.generator = "truncated-normal";
  } else if (name == "NT2") {
    spec.clusters = {{{-4.2, 0.0, 1.3}, 500}, {{-0.7, 1.9, 0.0}, 500}};
  } else {
    throw std::invalid_argument("builtin_scenario: unknown name '" + name + "'");
  }
  return spec;
}

GeneratedDataset generate_dataset(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t j_total = spec.total_sites();

  GeneratedDataset out;
  out.data.n_sites = j_total;
  out.data.n_triads = spec.n_triads;
  out.data.site_ids.reserve(j_total);
  out.truth.reserve(j_total);
  out.data.mother_values.reserve(j_total * spec.n_triads);
  out.data.father_values.reserve(j_total * spec.n_triads);
  out.data.child_values.reserve(j_total * spec.n_triads);

  for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
    Rng rng(mix_seed(spec.seed, c));
    if (spec.generator == "beta") {
      generate_cluster_beta(spec.clusters[c], spec.n_triads, rng, out.data.mother_values,
                            out.data.father_values, out.data.child_values);
    } else {
      generate_cluster_truncated_normal(spec.clusters[c], spec.n_triads, rng,
                                        out.data.mother_values, out.data.father_values,
                                        out.data.child_values);
    }
    for (std::size_t j = 0; j < spec.clusters[c].n_sites; ++j) out.truth.push_back(c);
  }

  char buf[32];
  for (std::size_t j = 0; j < j_total; ++j) {
    std::snprintf(buf, sizeof(buf), "site_%05zu", j);
    out.data.site_ids.emplace_back(buf);
  }
  for (std::size_t i = 0; i < spec.n_triads; ++i) {
    std::snprintf(buf, sizeof(buf), "triad_%03zu", i);
    out.data.subject_ids.emplace_back(buf);
  }
  out.data.validate();
  return out;
}

std::size_t smallest_slope_cluster(std::span<const ClusterCoefficients> coefficients) {
  if (coefficients.empty())
    throw std::invalid_argument("smallest_slope_cluster: no clusters");
  std::size_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    const double s = coefficients[k].gamma1 * coefficients[k].gamma1 +
                     coefficients[k].gamma2 * coefficients[k].gamma2;
    if (s < best) {
      best = s;
      arg = k;
    }
  }
  return arg;
}

std::size_t nontransmitted_cluster(const ScenarioSpec& spec) {
  std::size_t found = SIZE_MAX;
  for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
    if (spec.clusters[c].coefficients.gamma1 == 0.0 &&
        spec.clusters[c].coefficients.gamma2 == 0.0) {
      if (found != SIZE_MAX) return SIZE_MAX;
      found = c;
    }
  }
  return found;
}

}  // namespace triomix
