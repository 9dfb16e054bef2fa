#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cfarnet/random.hpp"

namespace cfarnet {

inline constexpr std::size_t kFeatureCount = 4;

/// Location and spread summaries of one observation, plain and robust.
struct FeatureVector {
  double mean = 0.0;
  double variance = 0.0;  // unbiased, 1/(n-1)
  double median = 0.0;
  double mad = 0.0;       // median absolute deviation from the median

  std::array<double, kFeatureCount> values() const { return {mean, variance, median, mad}; }
};

FeatureVector extract_features(std::span<const double> x);

/// Affine input standardization, (f - offset) / scale, frozen with the network.
struct FeatureNormalization {
  std::vector<double> offset;
  std::vector<double> scale;

  static FeatureNormalization identity(std::size_t width);
  /// Column means and standard deviations of a row-major table; zero spread maps to scale 1.
  static FeatureNormalization fit(std::span<const double> table, std::size_t width);

  std::size_t width() const { return offset.size(); }

  friend bool operator==(const FeatureNormalization&, const FeatureNormalization&) = default;
};

/// Fully connected scalar scorer: tanh hidden layers, identity output.
///
/// Parameters live in one flat buffer laid out layer by layer, each layer as
/// its row-major (out x in) weight matrix followed by its bias vector.
class ScoringNetwork {
 public:
  ScoringNetwork() = default;
  explicit ScoringNetwork(std::vector<std::size_t> layer_sizes);

  /// Uniform init in [-a, a] with a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static ScoringNetwork glorot(std::vector<std::size_t> layer_sizes, Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t max_width() const;
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  FeatureNormalization& normalization() { return norm_; }
  const FeatureNormalization& normalization() const { return norm_; }

  friend bool operator==(const ScoringNetwork&, const ScoringNetwork&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  FeatureNormalization norm_;
};

/// Hidden-layer nonlinearity: tanh evaluated with a single exp.
inline double activate(double z) {
  const double t = std::exp(-2.0 * std::abs(z));
  const double r = (1.0 - t) / (1.0 + t);
  return z < 0.0 ? -r : r;
}

/// Score of a raw feature row (before normalization).
double forward_features(const ScoringNetwork& net, std::span<const double> features);
/// Adds upstream * d(score)/d(theta) into `grad`.
void backward_features(const ScoringNetwork& net, std::span<const double> features, double upstream,
                       std::span<double> grad);

/// Score of an observation; requires a 4-input network.
double forward(const ScoringNetwork& net, std::span<const double> x);
std::vector<double> backward(const ScoringNetwork& net, std::span<const double> x, double upstream);

double sigmoid(double s);
/// Binary cross-entropy on the logit, log(1 + e^s) - y*s in overflow-free form.
double bce_loss(double score, int label);
/// d bce_loss / d score = sigmoid(score) - label.
double bce_gradient(double score, int label);

// Network file: "CFARNET1" magic, u32 version, u32 activation id, u64 layer
// count + sizes, u64 normalization width + offsets + scales, u64 parameter
// count + parameters. Integers and doubles little-endian.
void write_network(const ScoringNetwork& net, std::ostream& os);
ScoringNetwork read_network(std::istream& is);
void save_network(const ScoringNetwork& net, const std::filesystem::path& path);
ScoringNetwork load_network(const std::filesystem::path& path);

}  // namespace cfarnet
