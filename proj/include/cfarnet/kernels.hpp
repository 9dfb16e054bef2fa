#pragma once

// Data-parallel inner loops. `serial` is the straightforward reference kept
// for tests and benchmarks; `omp` is the production path. The OpenMP versions
// split work into fixed-size blocks and reduce block partials in block order,
// so their results do not depend on the number of threads.

#include <cstddef>
#include <span>
#include <vector>

#include "cfarnet/net.hpp"

namespace cfarnet::kernels {

/// Rows per work block in the OpenMP kernels.
inline constexpr std::size_t kBlock = 64;

namespace serial {

/// Sum over i, j of exp(-(a_i - b_j)^2 / (2 h^2)).
double rbf_gram_sum(std::span<const double> a, std::span<const double> b, double bandwidth);
/// Adds weight * d(gram_sum)/d(a_i) into grad_a and weight * d/d(b_j) into grad_b.
/// grad_a and grad_b may alias when a and b are the same sample.
void rbf_gram_gradient(std::span<const double> a, std::span<const double> b, double bandwidth,
                       double weight, std::span<double> grad_a, std::span<double> grad_b);

/// Feature rows for `count` observations of length `dim` laid out back to back.
void extract_features(std::span<const double> observations, std::size_t dim,
                      std::span<double> features);
void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores);
/// grad += sum_r upstream_r * d(score_r)/d(theta).
void accumulate_gradient(const ScoringNetwork& net, std::span<const double> features,
                         std::span<const double> upstream, std::span<double> grad);

}  // namespace serial

namespace omp {

/// Hidden and output activations of a forward pass, kept for the backward pass.
class ActivationCache {
 public:
  std::size_t rows() const { return rows_; }

 private:
  friend void forward(const ScoringNetwork&, std::span<const double>, std::span<double>,
                      ActivationCache&);
  friend void accumulate_gradient(const ScoringNetwork&, const ActivationCache&,
                                  std::span<const double>, std::span<double>);
  std::size_t rows_ = 0;
  std::size_t block_stride_ = 0;
  std::vector<std::size_t> layer_offset_;
  std::vector<double> acts_;
};

double rbf_gram_sum(std::span<const double> a, std::span<const double> b, double bandwidth);
void rbf_gram_gradient(std::span<const double> a, std::span<const double> b, double bandwidth,
                       double weight, std::span<double> grad_a, std::span<double> grad_b);

void extract_features(std::span<const double> observations, std::size_t dim,
                      std::span<double> features);
void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores);
void accumulate_gradient(const ScoringNetwork& net, std::span<const double> features,
                         std::span<const double> upstream, std::span<double> grad);

/// Forward pass that records activations into `cache`.
void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores,
             ActivationCache& cache);
/// Backward pass over the activations of the last cached forward pass of `net`.
void accumulate_gradient(const ScoringNetwork& net, const ActivationCache& cache,
                         std::span<const double> upstream, std::span<double> grad);

}  // namespace omp

/// Caps the OpenMP worker count; 0 restores the runtime default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace cfarnet::kernels
