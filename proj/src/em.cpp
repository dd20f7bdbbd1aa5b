#include "triomix/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>

#include "triomix/rng.hpp"

namespace triomix {

namespace {

constexpr double kMeanClamp = 1e-12;
constexpr double kEmptyClusterWeight = 1e-8;

double clamp_mean(double mu) {
  return std::min(std::max(mu, kMeanClamp), 1.0 - kMeanClamp);
}

// ---------------------------------------------------------------------------
// 3-parameter BFGS maximizer with Armijo backtracking.
// ---------------------------------------------------------------------------

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

Vec3 matvec(const Mat3& h, const Vec3& v) {
  Vec3 out{};
  for (int r = 0; r < 3; ++r)
    out[r] = h[r][0] * v[0] + h[r][1] * v[1] + h[r][2] * v[2];
  return out;
}

double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm_inf(const Vec3& v) {
  return std::max({std::fabs(v[0]), std::fabs(v[1]), std::fabs(v[2])});
}

Mat3 identity3() {
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

struct Bfgs3Result {
  Vec3 x{};
  double value = 0.0;
  bool improved = false;   // strictly better than the start
  bool stationary = false; // gradient small at the returned point
};

// Maximizes fn(x, &grad). Only accepts ascent steps, so the returned value
// never falls below fn(x0).
template <typename Fn>
Bfgs3Result maximize_bfgs3(Fn&& fn, const Vec3& x0, int max_iter = 100) {
  Vec3 x = x0;
  Vec3 g{};
  double f = fn(x, &g);
  const double f0 = f;

  Mat3 h = identity3();  // approximate inverse Hessian of -fn
  bool h_unsized = true; // h carries no curvature information yet
  const double c1 = 1e-4;

  for (int it = 0; it < max_iter; ++it) {
    const double gtol = 1e-8 * (1.0 + std::fabs(f));
    if (norm_inf(g) <= gtol)
      return {x, f, f > f0, true};

    Vec3 p = matvec(h, g);  // ascent direction
    double gtp = dot(g, p);
    if (gtp <= 0.0) {  // stale curvature; fall back to steepest ascent
      h = identity3();
      h_unsized = true;
      p = g;
      gtp = dot(g, g);
    }

    // once h carries curvature the natural trial step is alpha = 1, but a raw
    // gradient step can be orders of magnitude too long and would burn most of
    // the halving budget, so cap the first trial step at unit infinity-norm
    double alpha = h_unsized ? 1.0 / (1.0 + norm_inf(p)) : 1.0;
    bool accepted = false;
    Vec3 xnew{}, gnew{};
    double fnew = f;
    for (int ls = 0; ls < 60; ++ls) {
      xnew = {x[0] + alpha * p[0], x[1] + alpha * p[1], x[2] + alpha * p[2]};
      fnew = fn(xnew, &gnew);
      if (std::isfinite(fnew) && fnew >= f + c1 * alpha * gtp) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted)
      return {x, f, f > f0, norm_inf(g) <= 1e-6 * (1.0 + std::fabs(f))};

    // steep directions can leave the gradient norm above gtol even when f is
    // maximal to machine precision; an accepted gain at the rounding floor of
    // f means further iterations can only crawl one ulp at a time
    if (fnew - f <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(f)))
      return {xnew, fnew, fnew > f0, true};

    const Vec3 s{xnew[0] - x[0], xnew[1] - x[1], xnew[2] - x[2]};
    // y is the gradient change of the minimized function -fn
    const Vec3 y{g[0] - gnew[0], g[1] - gnew[1], g[2] - gnew[2]};
    const double ys = dot(y, s);
    if (ys > 1e-14) {
      if (h_unsized) {
        // size the fresh identity from the first measured curvature pair so
        // subsequent unit trial steps match the objective's scale
        const double yy = dot(y, y);
        if (yy > 0.0) {
          const double scale = ys / yy;
          h = {{{scale, 0.0, 0.0}, {0.0, scale, 0.0}, {0.0, 0.0, scale}}};
        }
        h_unsized = false;
      }
      const double rho = 1.0 / ys;
      // h <- (I - rho s y^T) h (I - rho y s^T) + rho s s^T
      Mat3 a{}, tmp{}, hnew{};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          a[r][c] = (r == c ? 1.0 : 0.0) - rho * s[r] * y[c];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          tmp[r][c] = a[r][0] * h[0][c] + a[r][1] * h[1][c] + a[r][2] * h[2][c];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          hnew[r][c] = tmp[r][0] * a[c][0] + tmp[r][1] * a[c][1] + tmp[r][2] * a[c][2] +
                       rho * s[r] * s[c];
      h = hnew;
    } else {
      h = identity3();
      h_unsized = true;
    }

    x = xnew;
    g = gnew;
    f = fnew;
  }
  return {x, f, f > f0, norm_inf(g) <= 1e-6 * (1.0 + std::fabs(f))};
}

// ---------------------------------------------------------------------------
// Initialization: OLS of O_j on (1, M_j, F_j) per random site group.
// ---------------------------------------------------------------------------

// Solves the 3x3 system a x = b by Gaussian elimination with partial
// pivoting; returns false on a (near-)singular system.
bool solve3(Mat3 a, Vec3 b, Vec3& x) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double m = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return true;
}

ClusterCoefficients ols_fit(const SiteWorkspace& ws, std::span<const std::size_t> sites) {
  Mat3 xtx{};
  Vec3 xty{};
  double o_sum = 0.0;
  for (std::size_t j : sites) {
    const Vec3 row{1.0, ws.logit_mother[j], ws.logit_father[j]};
    const double o = ws.logit_child[j];
    o_sum += o;
    for (int r = 0; r < 3; ++r) {
      xty[r] += row[r] * o;
      for (int c = 0; c < 3; ++c) xtx[r][c] += row[r] * row[c];
    }
  }
  Vec3 g{};
  if (!sites.empty() && solve3(xtx, xty, g))
    return {g[0], g[1], g[2]};
  const double mean_o = sites.empty() ? 0.0 : o_sum / static_cast<double>(sites.size());
  return {mean_o, 0.0, 0.0};
}

EmInit ols_partition_init(const SiteWorkspace& ws, std::size_t n_clusters, Rng& rng) {
  const std::size_t j_total = ws.n_sites;
  std::vector<std::size_t> order(j_total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> groups(n_clusters);
  for (std::size_t i = 0; i < j_total; ++i)
    groups[i % n_clusters].push_back(order[i]);

  EmInit init;
  init.coefficients.reserve(n_clusters);
  for (std::size_t k = 0; k < n_clusters; ++k) {
    ClusterCoefficients g = ols_fit(ws, groups[k]);
    if (groups[k].empty())  // more clusters than sites; keep starts distinct
      g.gamma0 += 0.01 * static_cast<double>(k);
    init.coefficients.push_back(g);
  }
  init.mixing.assign(n_clusters, 1.0 / static_cast<double>(n_clusters));
  return init;
}

}  // namespace

// ---------------------------------------------------------------------------
// Workspace
// ---------------------------------------------------------------------------

SiteWorkspace SiteWorkspace::build(const TriadDataset& data,
                                   std::span<const SiteScales> scales) {
  if (scales.size() != data.n_sites)
    throw std::invalid_argument("SiteWorkspace: scales length does not match n_sites");

  SiteWorkspace ws;
  ws.n_sites = data.n_sites;
  ws.n_triads = data.n_triads;
  ws.logit_mother.resize(ws.n_sites);
  ws.logit_father.resize(ws.n_sites);
  ws.logit_child.resize(ws.n_sites);
  ws.child_precision.resize(ws.n_sites);
  ws.lgamma_phi.resize(ws.n_sites);
  ws.sum_log_child.resize(ws.n_sites);
  ws.sum_log1m_child.resize(ws.n_sites);
  ws.parental_loglik.resize(ws.n_sites);

  const double n = static_cast<double>(ws.n_triads);
  for (std::size_t j = 0; j < ws.n_sites; ++j) {
    const SiteScales& s = scales[j];
    ws.logit_mother[j] = s.logit_mean_mother;
    ws.logit_father[j] = s.logit_mean_father;
    ws.logit_child[j] = s.logit_mean_child;
    ws.child_precision[j] = s.child_precision;
    ws.lgamma_phi[j] = std::lgamma(s.child_precision);

    double sy = 0.0, s1y = 0.0, sm = 0.0, s1m = 0.0, sf = 0.0, s1f = 0.0;
    for (std::size_t i = 0; i < ws.n_triads; ++i) {
      sy += std::log(data.child(j, i));
      s1y += std::log1p(-data.child(j, i));
      sm += std::log(data.mother(j, i));
      s1m += std::log1p(-data.mother(j, i));
      sf += std::log(data.father(j, i));
      s1f += std::log1p(-data.father(j, i));
    }
    ws.sum_log_child[j] = sy;
    ws.sum_log1m_child[j] = s1y;

    const auto lbeta_const = [](const BetaScale& b) {
      return std::lgamma(b.alpha + b.beta) - std::lgamma(b.alpha) - std::lgamma(b.beta);
    };
    ws.parental_loglik[j] = n * lbeta_const(s.mother) + (s.mother.alpha - 1.0) * sm +
                            (s.mother.beta - 1.0) * s1m + n * lbeta_const(s.father) +
                            (s.father.alpha - 1.0) * sf + (s.father.beta - 1.0) * s1f;
  }
  return ws;
}

double SiteWorkspace::child_loglik(std::size_t j, const ClusterCoefficients& coeff) const {
  const double mu = clamp_mean(inverse_logit(coeff.eta(logit_mother[j], logit_father[j])));
  const double phi = child_precision[j];
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  const double n = static_cast<double>(n_triads);
  return n * (lgamma_phi[j] - std::lgamma(a) - std::lgamma(b)) +
         (a - 1.0) * sum_log_child[j] + (b - 1.0) * sum_log1m_child[j];
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

double child_cluster_mean(const ClusterCoefficients& coeff, const SiteScales& site) {
  return clamp_mean(
      inverse_logit(coeff.eta(site.logit_mean_mother, site.logit_mean_father)));
}

double site_cluster_loglik(std::size_t site_index, const ClusterCoefficients& coeff,
                           const TriadDataset& data, std::span<const SiteScales> scales) {
  const SiteScales& s = scales[site_index];
  const double mu = child_cluster_mean(coeff, s);
  const BetaScale child_scale = BetaScale::from_mean_precision(mu, s.child_precision);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n_triads; ++i) {
    ll += beta_log_density(data.child(site_index, i), child_scale);
    ll += beta_log_density(data.mother(site_index, i), s.mother);
    ll += beta_log_density(data.father(site_index, i), s.father);
  }
  return ll;
}

std::vector<double> e_step(std::span<const ClusterCoefficients> coefficients,
                           std::span<const double> mixing, const SiteWorkspace& ws,
                           std::size_t* n_underflow, double* loglik) {
  const std::size_t n_clusters = coefficients.size();
  std::vector<double> resp(ws.n_sites * n_clusters);
  std::vector<double> w(n_clusters);
  std::size_t underflow = 0;
  double total_ll = 0.0;

  std::vector<double> log_pi(n_clusters);
  for (std::size_t k = 0; k < n_clusters; ++k)
    log_pi[k] = mixing[k] > 0.0 ? std::log(mixing[k])
                                : -std::numeric_limits<double>::infinity();

  for (std::size_t j = 0; j < ws.n_sites; ++j) {
    double wmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_clusters; ++k) {
      w[k] = log_pi[k] + ws.child_loglik(j, coefficients[k]);
      wmax = std::max(wmax, w[k]);
    }
    double* row = resp.data() + j * n_clusters;
    if (!std::isfinite(wmax)) {
      ++underflow;
      std::fill(row, row + n_clusters, 1.0 / static_cast<double>(n_clusters));
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n_clusters; ++k) {
      row[k] = std::exp(w[k] - wmax);
      sum += row[k];
    }
    for (std::size_t k = 0; k < n_clusters; ++k) row[k] /= sum;
    total_ll += wmax + std::log(sum) + ws.parental_loglik[j];
  }
  if (n_underflow) *n_underflow = underflow;
  if (loglik) *loglik = total_ll;
  return resp;
}

std::vector<double> m_step_pi(std::span<const double> responsibilities,
                              std::size_t n_sites, std::size_t n_clusters) {
  std::vector<double> pi(n_clusters, 0.0);
  for (std::size_t j = 0; j < n_sites; ++j)
    for (std::size_t k = 0; k < n_clusters; ++k)
      pi[k] += responsibilities[j * n_clusters + k];
  for (double& p : pi) p /= static_cast<double>(n_sites);
  return pi;
}

double cluster_objective(const SiteWorkspace& ws, std::span<const double> weights,
                         const ClusterCoefficients& coeff, std::array<double, 3>* grad) {
  const double n = static_cast<double>(ws.n_triads);
  double f = 0.0;
  double g0 = 0.0, g1 = 0.0, g2 = 0.0;
  for (std::size_t j = 0; j < ws.n_sites; ++j) {
    const double w = weights[j];
    if (w == 0.0) continue;
    const double raw = inverse_logit(coeff.eta(ws.logit_mother[j], ws.logit_father[j]));
    const double mu = clamp_mean(raw);
    const double phi = ws.child_precision[j];
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    f += w * (n * (ws.lgamma_phi[j] - std::lgamma(a) - std::lgamma(b)) +
              (a - 1.0) * ws.sum_log_child[j] + (b - 1.0) * ws.sum_log1m_child[j]);
    if (grad) {
      // the objective is flat in eta wherever the mean sits on the clamp, so
      // the chain factor must vanish there or the line search chases a slope
      // that the clamped objective does not have
      const double dmu_deta = raw == mu ? mu * (1.0 - mu) : 0.0;
      const double dll_dmu = phi * (n * (boost::math::digamma(b) - boost::math::digamma(a)) +
                                    ws.sum_log_child[j] - ws.sum_log1m_child[j]);
      const double deta = w * dll_dmu * dmu_deta;
      g0 += deta;
      g1 += deta * ws.logit_mother[j];
      g2 += deta * ws.logit_father[j];
    }
  }
  if (grad) *grad = {g0, g1, g2};
  return f;
}

std::vector<ClusterCoefficients> m_step_gamma(const MixtureState& state,
                                              const SiteWorkspace& ws) {
  const std::size_t n_clusters = state.n_clusters;
  std::vector<ClusterCoefficients> out = state.coefficients;
  std::vector<double> weights(ws.n_sites);

  for (std::size_t k = 0; k < n_clusters; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < ws.n_sites; ++j) {
      weights[j] = state.resp(j, k);
      total += weights[j];
    }
    if (total < kEmptyClusterWeight) continue;  // null cluster: freeze

    const auto fn = [&](const Vec3& x, Vec3* g) {
      std::array<double, 3> grad{};
      const double f =
          cluster_objective(ws, weights, {x[0], x[1], x[2]}, g ? &grad : nullptr);
      if (g) *g = grad;
      return f;
    };

    const ClusterCoefficients& start = state.coefficients[k];
    Bfgs3Result r = maximize_bfgs3(fn, {start.gamma0, start.gamma1, start.gamma2});
    if (!r.improved && !r.stationary) {
      // retry from a nudged start before declaring failure
      Bfgs3Result r2 = maximize_bfgs3(
          fn, {start.gamma0 + 1e-3, start.gamma1 - 1e-3, start.gamma2 + 1e-3});
      if (r2.value > r.value && (r2.improved || r2.stationary)) {
        r = r2;
      } else {
        throw optimizer_failure("m_step_gamma: no ascent found for cluster " +
                                std::to_string(k));
      }
    }
    if (r.value >= fn({start.gamma0, start.gamma1, start.gamma2}, nullptr))
      out[k] = {r.x[0], r.x[1], r.x[2]};
  }
  return out;
}

double observed_loglik(const SiteWorkspace& ws,
                       std::span<const ClusterCoefficients> coefficients,
                       std::span<const double> mixing) {
  const std::size_t n_clusters = coefficients.size();
  std::vector<double> w(n_clusters);
  double total = 0.0;
  for (std::size_t j = 0; j < ws.n_sites; ++j) {
    double wmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_clusters; ++k) {
      w[k] = (mixing[k] > 0.0 ? std::log(mixing[k])
                              : -std::numeric_limits<double>::infinity()) +
             ws.child_loglik(j, coefficients[k]);
      wmax = std::max(wmax, w[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n_clusters; ++k) sum += std::exp(w[k] - wmax);
    total += wmax + std::log(sum) + ws.parental_loglik[j];
  }
  return total;
}

MixtureState run_em_single(const SiteWorkspace& ws, const EmInit& init,
                           const EmConfig& config) {
  const std::size_t n_clusters = init.coefficients.size();
  if (n_clusters == 0 || init.mixing.size() != n_clusters)
    throw std::invalid_argument("run_em_single: empty or inconsistent init");

  MixtureState state;
  state.n_sites = ws.n_sites;
  state.n_clusters = n_clusters;
  state.coefficients = init.coefficients;
  state.mixing = init.mixing;

  // one E-step pass yields both the responsibilities and the observed
  // log-likelihood at the current parameters, so the loop runs E, checks
  // convergence against the previous value, then does both M-steps
  std::size_t underflow = 0;
  double ll = 0.0;
  state.responsibilities =
      e_step(state.coefficients, state.mixing, ws, &underflow, &ll);
  state.n_underflow_sites = underflow;
  state.loglik_trace.push_back(ll);

  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    state.mixing = m_step_pi(state.responsibilities, ws.n_sites, n_clusters);
    state.coefficients = m_step_gamma(state, ws);

    state.responsibilities =
        e_step(state.coefficients, state.mixing, ws, &underflow, &ll);
    state.n_underflow_sites = underflow;
    const double prev = state.loglik_trace.back();
    state.loglik_trace.push_back(ll);
    state.iteration = iter;
    if (ll - prev < config.tol) {
      state.converged = true;
      break;
    }
  }
  return state;
}

MixtureState run_em(const TriadDataset& data, std::span<const SiteScales> scales,
                    const EmConfig& config) {
  const SiteWorkspace ws = SiteWorkspace::build(data, scales);
  return run_em(ws, config);
}

MixtureState run_em(const SiteWorkspace& ws, const EmConfig& config) {
  if (config.n_clusters == 0 || config.n_restarts == 0 || !(config.tol > 0.0))
    throw std::invalid_argument("run_em: invalid config");

  MixtureState best;
  bool have_best = false;
  std::string last_error;

  for (std::size_t s = 0; s < config.n_restarts; ++s) {
    Rng rng(mix_seed(config.seed, s));
    const EmInit init = ols_partition_init(ws, config.n_clusters, rng);
    try {
      MixtureState state = run_em_single(ws, init, config);
      if (!have_best || state.loglik() > best.loglik()) {
        best = std::move(state);
        have_best = true;
      }
    } catch (const optimizer_failure& e) {
      last_error = e.what();
    }
  }
  if (!have_best)
    throw optimizer_failure("run_em: all restarts failed: " + last_error);
  return best;
}

std::vector<std::size_t> hard_assignments(const MixtureState& state) {
  std::vector<std::size_t> out(state.n_sites);
  for (std::size_t j = 0; j < state.n_sites; ++j) {
    std::size_t arg = 0;
    double bestv = state.resp(j, 0);
    for (std::size_t k = 1; k < state.n_clusters; ++k) {
      if (state.resp(j, k) > bestv) {
        bestv = state.resp(j, k);
        arg = k;
      }
    }
    out[j] = arg;
  }
  return out;
}

}  // namespace triomix
