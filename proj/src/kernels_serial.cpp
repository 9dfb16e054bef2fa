#include <cmath>
#include <stdexcept>

#include "cfarnet/kernels.hpp"

namespace cfarnet::kernels::serial {

double rbf_gram_sum(std::span<const double> a, std::span<const double> b, double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  double sum = 0.0;
  for (double ai : a)
    for (double bj : b) {
      const double d = ai - bj;
      sum += std::exp(-d * d * inv);
    }
  return sum;
}

void rbf_gram_gradient(std::span<const double> a, std::span<const double> b, double bandwidth,
                       double weight, std::span<double> grad_a, std::span<double> grad_b) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = a[i] - b[j];
      const double dk = -d * inv_h2 * std::exp(-d * d * inv) * weight;
      grad_a[i] += dk;
      grad_b[j] -= dk;
    }
}

void extract_features(std::span<const double> observations, std::size_t dim,
                      std::span<double> features) {
  const std::size_t count = observations.size() / dim;
  if (features.size() != count * kFeatureCount)
    throw std::invalid_argument("extract_features: output buffer has the wrong size");
  for (std::size_t r = 0; r < count; ++r) {
    const auto f = cfarnet::extract_features(observations.subspan(r * dim, dim)).values();
    for (std::size_t c = 0; c < kFeatureCount; ++c) features[r * kFeatureCount + c] = f[c];
  }
}

void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores) {
  const std::size_t width = net.input_size();
  for (std::size_t r = 0; r < scores.size(); ++r)
    scores[r] = forward_features(net, features.subspan(r * width, width));
}

void accumulate_gradient(const ScoringNetwork& net, std::span<const double> features,
                         std::span<const double> upstream, std::span<double> grad) {
  const std::size_t width = net.input_size();
  for (std::size_t r = 0; r < upstream.size(); ++r)
    backward_features(net, features.subspan(r * width, width), upstream[r], grad);
}

}  // namespace cfarnet::kernels::serial
