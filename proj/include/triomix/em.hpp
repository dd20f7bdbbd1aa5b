#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "triomix/data.hpp"

namespace triomix {

// Transmission coefficients of one cluster: intercept, maternal strength,
// paternal strength.
struct ClusterCoefficients {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  double eta(double logit_mother, double logit_father) const {
    return gamma0 + gamma1 * logit_mother + gamma2 * logit_father;
  }
};

struct EmConfig {
  std::size_t n_clusters = 1;  // K
  double tol = 1e-7;           // stop when the log-likelihood increase drops below this
  std::size_t max_iter = 500;
  std::size_t n_restarts = 5;
  std::uint64_t seed = 0;
};

struct MixtureState {
  std::size_t n_sites = 0;
  std::size_t n_clusters = 0;
  std::vector<ClusterCoefficients> coefficients;  // K
  std::vector<double> mixing;                     // K, sums to 1
  std::vector<double> responsibilities;           // J x K, row-major, rows sum to 1
  std::vector<double> loglik_trace;               // one value per EM iteration, nondecreasing
  std::size_t iteration = 0;
  bool converged = false;
  std::size_t n_underflow_sites = 0;  // sites that fell back to uniform responsibilities

  double resp(std::size_t j, std::size_t k) const { return responsibilities[j * n_clusters + k]; }
  double loglik() const {
    return loglik_trace.empty() ? -std::numeric_limits<double>::infinity()
                                : loglik_trace.back();
  }
};

struct optimizer_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-site sufficient statistics for the empirical EM. The child likelihood
// under any coefficients reduces to an O(1) expression in these sums, which
// is what makes E-steps and M-step line searches cheap.
struct SiteWorkspace {
  std::size_t n_sites = 0;
  std::size_t n_triads = 0;
  std::vector<double> logit_mother;     // M_j
  std::vector<double> logit_father;     // F_j
  std::vector<double> logit_child;      // O_j, used only for initialization
  std::vector<double> child_precision;  // phi_j, held at its empirical value
  std::vector<double> lgamma_phi;
  std::vector<double> sum_log_child;    // sum_i log y_ij
  std::vector<double> sum_log1m_child;  // sum_i log(1 - y_ij)
  std::vector<double> parental_loglik;  // sum_i log f(Z1_ij) + log f(Z2_ij), empirical scales

  static SiteWorkspace build(const TriadDataset& data, std::span<const SiteScales> scales);

  // sum_i log Beta(y_ij; mu*phi_j, (1-mu)*phi_j) with mu implied by coeff.
  double child_loglik(std::size_t j, const ClusterCoefficients& coeff) const;
};

// Model-implied population mean methylation of the child at one site,
// inverse_logit(gamma0 + gamma1*M_j + gamma2*F_j), clamped into
// (1e-12, 1-1e-12).
double child_cluster_mean(const ClusterCoefficients& coeff, const SiteScales& site);

// Full per-site log-likelihood under one cluster: child terms at the
// cluster-implied mean plus the parental terms at their empirical scales.
// Reference O(I) evaluation; the workspace path must agree with it.
double site_cluster_loglik(std::size_t site_index, const ClusterCoefficients& coeff,
                           const TriadDataset& data, std::span<const SiteScales> scales);

// Responsibilities r_jk = pi_k L_jk / sum_k' pi_k' L_jk', computed in log
// space. Parental terms cancel in the ratio and are skipped. Sites where
// every weight underflows get a uniform row; the count is returned through
// *n_underflow when non-null. The observed-data log-likelihood at the same
// parameters falls out of the pass for free and is written to *loglik.
std::vector<double> e_step(std::span<const ClusterCoefficients> coefficients,
                           std::span<const double> mixing, const SiteWorkspace& ws,
                           std::size_t* n_underflow = nullptr,
                           double* loglik = nullptr);

// pi_k = column mean of the responsibility matrix.
std::vector<double> m_step_pi(std::span<const double> responsibilities,
                              std::size_t n_sites, std::size_t n_clusters);

// Responsibility-weighted child log-likelihood of one cluster, the function
// the gamma M-step maximizes. Fills *grad with the analytic gradient when
// non-null.
double cluster_objective(const SiteWorkspace& ws, std::span<const double> weights,
                         const ClusterCoefficients& coeff,
                         std::array<double, 3>* grad = nullptr);

// Quasi-Newton update of every cluster's coefficients. Clusters whose total
// responsibility falls below 1e-8 are frozen. Guarantees no decrease of the
// per-cluster objective; throws optimizer_failure if a cluster with a clearly
// nonzero gradient cannot be improved.
std::vector<ClusterCoefficients> m_step_gamma(const MixtureState& state,
                                              const SiteWorkspace& ws);

// Observed-data log-likelihood, parental terms included.
double observed_loglik(const SiteWorkspace& ws,
                       std::span<const ClusterCoefficients> coefficients,
                       std::span<const double> mixing);

struct EmInit {
  std::vector<ClusterCoefficients> coefficients;
  std::vector<double> mixing;
};

// One EM run from an explicit initial state.
MixtureState run_em_single(const SiteWorkspace& ws, const EmInit& init,
                           const EmConfig& config);

// Full empirical EM: n_restarts runs, each initialized by ordinary least
// squares of O_j on (1, M_j, F_j) over a seeded random partition of sites
// into K groups; returns the run with the highest final log-likelihood.
MixtureState run_em(const TriadDataset& data, std::span<const SiteScales> scales,
                    const EmConfig& config);
MixtureState run_em(const SiteWorkspace& ws, const EmConfig& config);

// Per-site argmax responsibility; ties break toward the lowest cluster index.
std::vector<std::size_t> hard_assignments(const MixtureState& state);

}  // namespace triomix
