#pragma once

#include <functional>
#include <span>

namespace cfarnet {

/// Decide 1 iff score >= gamma.
struct ThresholdRule {
  double gamma = 0.0;
};

int apply_threshold(double score, const ThresholdRule& rule);

using LogDensity = std::function<double(std::span<const double>)>;

/// 2 * (log p1(x) - log p0(x)). Throws std::domain_error if either log density is not finite.
double lrt_score(const LogDensity& log_p1, const LogDensity& log_p0, std::span<const double> x);

/// Gaussian-noise GLRT for an unknown amplitude and scale: (sum x)^2 / (sum x^2).
/// Scale invariant with range [0, n]; the all-zero vector scores 0.
double glrt_gaussian_score(std::span<const double> x);

}  // namespace cfarnet
