#pragma once

#include <span>
#include <vector>

namespace cfarnet {

/// Gaussian RBF length scale.
struct KernelConfig {
  double bandwidth = 1.0;

  void validate() const;
};

/// exp(-(a - b)^2 / (2 h^2)).
double rbf_kernel(double a, double b, const KernelConfig& cfg);

/// Biased (V-statistic) empirical MMD between two scalar samples:
///   (1/N^2) sum k(x_i, x_j) + (1/M^2) sum k(y_i, y_j) - (2/NM) sum k(x_i, y_j).
/// Non-negative, symmetric, and defined for singleton samples.
double mmd_biased(std::span<const double> first, std::span<const double> second,
                  const KernelConfig& cfg);

/// Unbiased (U-statistic) empirical MMD: the within-sample sums exclude the diagonal and are
/// normalized by N(N-1) and M(M-1). Can be negative; both samples need at least 2 entries.
double mmd_unbiased(std::span<const double> first, std::span<const double> second,
                    const KernelConfig& cfg);

enum class MmdEstimator { biased, unbiased };

double mmd(std::span<const double> first, std::span<const double> second, const KernelConfig& cfg,
           MmdEstimator estimator);

struct MmdGradient {
  std::vector<double> first;
  std::vector<double> second;
};

/// Exact partial derivatives of the chosen estimator with respect to every sample entry.
MmdGradient mmd_gradient(std::span<const double> first, std::span<const double> second,
                         const KernelConfig& cfg, MmdEstimator estimator = MmdEstimator::biased);

/// Adds weight * d(mmd)/d(entry) into the two gradient buffers.
void accumulate_mmd_gradient(std::span<const double> first, std::span<const double> second,
                             const KernelConfig& cfg, double weight, std::span<double> grad_first,
                             std::span<double> grad_second,
                             MmdEstimator estimator = MmdEstimator::biased);

/// Median of the nonzero pairwise absolute differences; 1 when every pair is tied.
KernelConfig median_heuristic_bandwidth(std::span<const double> samples);

}  // namespace cfarnet
