#pragma once

#include <cstddef>
#include <span>
#include <utility>

namespace triomix {

// Methylation values are kept strictly inside (0,1); anything closer to the
// boundary than this gets clipped at ingestion / generation time.
inline constexpr double kUnitClip = 1e-6;

// Shape parameters of a Beta distribution.
struct BetaScale {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
  double precision() const { return alpha + beta; }
  double variance() const {
    const double m = mean();
    return m * (1.0 - m) / (precision() + 1.0);
  }
  // log(alpha) - log(beta), the logit of the mean.
  double logit_mean() const;

  static BetaScale from_mean_precision(double mean, double precision);
};

// log(p / (1-p)). Throws std::domain_error unless 0 < p < 1.
double logit(double p);

// Logistic function, exact inverse of logit on (0,1).
double inverse_logit(double x);

// Log density of Beta(scale.alpha, scale.beta) at x in (0,1).
// Throws std::domain_error on boundary or out-of-range x.
double beta_log_density(double x, const BetaScale& scale);

// Clip into [kUnitClip, 1 - kUnitClip]; second element reports whether the
// value was moved.
std::pair<double, bool> clip_unit(double x);

// Moment-based shape estimator: with sample mean m and sample variance v
// (n-1 denominator), alpha = m*(m(1-m)/v - 1), beta = (1-m)*(m(1-m)/v - 1).
// If v >= m(1-m) the inversion would give nonpositive shapes, so v is clamped
// to 0.99*m(1-m) and *clamped (when non-null) is set.
// Throws std::invalid_argument on fewer than 2 values or zero variance.
BetaScale estimate_scales_from_moments(std::span<const double> values,
                                       bool* clamped = nullptr);

}  // namespace triomix
