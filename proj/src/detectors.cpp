#include "cfarnet/detectors.hpp"

#include <cmath>
#include <stdexcept>

namespace cfarnet {

int apply_threshold(double score, const ThresholdRule& rule) {
  if (!std::isfinite(score)) throw std::invalid_argument("apply_threshold: score must be finite");
  return score >= rule.gamma ? 1 : 0;
}

double lrt_score(const LogDensity& log_p1, const LogDensity& log_p0, std::span<const double> x) {
  const double l1 = log_p1(x);
  const double l0 = log_p0(x);
  if (!std::isfinite(l1) || !std::isfinite(l0))
    throw std::domain_error("lrt_score: log density is not finite at the observation");
  return 2.0 * (l1 - l0);
}

double glrt_gaussian_score(std::span<const double> x) {
  double sum = 0.0, energy = 0.0;
  for (double v : x) {
    sum += v;
    energy += v * v;
  }
  if (energy == 0.0) return 0.0;
  return sum * sum / energy;
}

}  // namespace cfarnet
