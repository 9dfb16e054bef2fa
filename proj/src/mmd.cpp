#include "cfarnet/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfarnet/kernels.hpp"

namespace cfarnet {

namespace {

void check_samples(std::span<const double> first, std::span<const double> second) {
  if (first.empty() || second.empty()) throw std::invalid_argument("mmd: samples must be non-empty");
}

}  // namespace

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("kernel bandwidth must be positive and finite");
}

double rbf_kernel(double a, double b, const KernelConfig& cfg) {
  cfg.validate();
  const double d = a - b;
  return std::exp(-d * d / (2.0 * cfg.bandwidth * cfg.bandwidth));
}

double mmd_biased(std::span<const double> first, std::span<const double> second,
                  const KernelConfig& cfg) {
  check_samples(first, second);
  cfg.validate();
  const double n = static_cast<double>(first.size());
  const double m = static_cast<double>(second.size());
  const double h = cfg.bandwidth;
  const double kxx = kernels::omp::rbf_gram_sum(first, first, h);
  const double kyy = kernels::omp::rbf_gram_sum(second, second, h);
  const double kxy = kernels::omp::rbf_gram_sum(first, second, h);
  return kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m);
}

double mmd_unbiased(std::span<const double> first, std::span<const double> second,
                    const KernelConfig& cfg) {
  if (first.size() < 2 || second.size() < 2)
    throw std::invalid_argument("mmd_unbiased: each sample needs at least 2 entries");
  cfg.validate();
  const double n = static_cast<double>(first.size());
  const double m = static_cast<double>(second.size());
  const double h = cfg.bandwidth;
  // k(x, x) = 1, so the off-diagonal sum is the full sum minus the sample size.
  const double kxx = kernels::omp::rbf_gram_sum(first, first, h) - n;
  const double kyy = kernels::omp::rbf_gram_sum(second, second, h) - m;
  const double kxy = kernels::omp::rbf_gram_sum(first, second, h);
  return kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m);
}

double mmd(std::span<const double> first, std::span<const double> second, const KernelConfig& cfg,
           MmdEstimator estimator) {
  return estimator == MmdEstimator::biased ? mmd_biased(first, second, cfg)
                                           : mmd_unbiased(first, second, cfg);
}

void accumulate_mmd_gradient(std::span<const double> first, std::span<const double> second,
                             const KernelConfig& cfg, double weight, std::span<double> grad_first,
                             std::span<double> grad_second, MmdEstimator estimator) {
  check_samples(first, second);
  if (estimator == MmdEstimator::unbiased && (first.size() < 2 || second.size() < 2))
    throw std::invalid_argument("mmd_unbiased: each sample needs at least 2 entries");
  cfg.validate();
  if (grad_first.size() != first.size() || grad_second.size() != second.size())
    throw std::invalid_argument("mmd gradient buffers do not match sample sizes");
  const double n = static_cast<double>(first.size());
  const double m = static_cast<double>(second.size());
  const double h = cfg.bandwidth;
  // Diagonal terms are constant, so both estimators differ only in the within-sample weights.
  const double wn = estimator == MmdEstimator::biased ? n * n : n * (n - 1.0);
  const double wm = estimator == MmdEstimator::biased ? m * m : m * (m - 1.0);
  kernels::omp::rbf_gram_gradient(first, first, h, weight / wn, grad_first, grad_first);
  kernels::omp::rbf_gram_gradient(second, second, h, weight / wm, grad_second, grad_second);
  kernels::omp::rbf_gram_gradient(first, second, h, -2.0 * weight / (n * m), grad_first, grad_second);
}

MmdGradient mmd_gradient(std::span<const double> first, std::span<const double> second,
                         const KernelConfig& cfg, MmdEstimator estimator) {
  MmdGradient g{std::vector<double>(first.size(), 0.0), std::vector<double>(second.size(), 0.0)};
  accumulate_mmd_gradient(first, second, cfg, 1.0, g.first, g.second, estimator);
  return g;
}

KernelConfig median_heuristic_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("median_heuristic_bandwidth: need at least 2 samples");
  std::vector<double> dists;
  dists.reserve(samples.size() * (samples.size() - 1) / 2);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const double d = std::abs(samples[i] - samples[j]);
      if (d > 0.0) dists.push_back(d);
    }
  if (dists.empty()) return {1.0};
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) median = 0.5 * (median + *std::max_element(dists.begin(), dists.begin() + mid));
  return {median};
}

}  // namespace cfarnet
