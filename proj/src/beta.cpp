#include "triomix/beta.hpp"

#include <cmath>
#include <stdexcept>

namespace triomix {

double BetaScale::logit_mean() const {
  return std::log(alpha) - std::log(beta);
}

BetaScale BetaScale::from_mean_precision(double mean, double precision) {
  if (!(mean > 0.0 && mean < 1.0) || !(precision > 0.0))
    throw std::invalid_argument("from_mean_precision: need mean in (0,1) and precision > 0");
  return {mean * precision, (1.0 - mean) * precision};
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("logit: argument must lie in (0,1)");
  return std::log(p) - std::log1p(-p);
}

double inverse_logit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double beta_log_density(double x, const BetaScale& scale) {
  if (!(x > 0.0 && x < 1.0))
    throw std::domain_error("beta_log_density: x must lie in (0,1)");
  if (!(scale.alpha > 0.0 && scale.beta > 0.0))
    throw std::domain_error("beta_log_density: shapes must be positive");
  return std::lgamma(scale.alpha + scale.beta) - std::lgamma(scale.alpha) -
         std::lgamma(scale.beta) + (scale.alpha - 1.0) * std::log(x) +
         (scale.beta - 1.0) * std::log1p(-x);
}

std::pair<double, bool> clip_unit(double x) {
  if (x < kUnitClip) return {kUnitClip, true};
  if (x > 1.0 - kUnitClip) return {1.0 - kUnitClip, true};
  return {x, false};
}

BetaScale estimate_scales_from_moments(std::span<const double> values,
                                       bool* clamped) {
  const std::size_t n = values.size();
  if (n < 2)
    throw std::invalid_argument("estimate_scales_from_moments: need at least 2 values");

  double sum = 0.0;
  for (double v : values) sum += v;
  const double m = sum / static_cast<double>(n);

  double ss = 0.0;
  for (double v : values) {
    const double d = v - m;
    ss += d * d;
  }
  double v = ss / static_cast<double>(n - 1);

  if (v <= 0.0)
    throw std::invalid_argument("estimate_scales_from_moments: degenerate input (zero variance)");

  const double bound = m * (1.0 - m);
  if (v >= bound) {
    v = 0.99 * bound;
    if (clamped) *clamped = true;
  } else if (clamped) {
    *clamped = false;
  }

  const double c = bound / v - 1.0;  // > 0 after the clamp
  return {m * c, (1.0 - m) * c};
}

}  // namespace triomix
