#include "cfarnet/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cfarnet/binary_io.hpp"

namespace cfarnet {

namespace {

constexpr char kNetworkMagic[] = "CFARNET1";
constexpr std::uint32_t kNetworkVersion = 1;
constexpr std::uint32_t kActivationTanh = 1;

// Median of a scratch buffer; reorders it.
double median_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

void check_layout(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
  if (sizes.back() != 1) throw std::invalid_argument("network output layer must have width 1");
  for (std::size_t s : sizes)
    if (s == 0) throw std::invalid_argument("network layer widths must be positive");
}

}  // namespace

FeatureVector extract_features(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("extract_features: observation length must be at least 2");
  FeatureVector f;
  f.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - f.mean) * (v - f.mean);
  f.variance = ss / static_cast<double>(n - 1);

  std::vector<double> scratch(x.begin(), x.end());
  f.median = median_in_place(scratch);
  for (std::size_t k = 0; k < n; ++k) scratch[k] = std::abs(x[k] - f.median);
  f.mad = median_in_place(scratch);
  return f;
}

FeatureNormalization FeatureNormalization::identity(std::size_t width) {
  return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

FeatureNormalization FeatureNormalization::fit(std::span<const double> table, std::size_t width) {
  if (width == 0 || table.empty() || table.size() % width != 0)
    throw std::invalid_argument("FeatureNormalization::fit: table is not a non-empty row-major matrix");
  const std::size_t rows = table.size() / width;
  FeatureNormalization norm = identity(width);
  for (std::size_t c = 0; c < width; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sum += table[r * width + c];
    const double mean = sum / static_cast<double>(rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = table[r * width + c] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(rows));
    norm.offset[c] = mean;
    norm.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return norm;
}

ScoringNetwork::ScoringNetwork(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  check_layout(sizes_);
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
  norm_ = FeatureNormalization::identity(sizes_.front());
}

ScoringNetwork ScoringNetwork::glorot(std::vector<std::size_t> layer_sizes, Rng& rng) {
  ScoringNetwork net(std::move(layer_sizes));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double fan = static_cast<double>(net.sizes_[l] + net.sizes_[l + 1]);
    const double a = std::sqrt(6.0 / fan);
    for (double& w : net.weights(l)) w = rng.uniform(-a, a);
  }
  return net;
}

std::size_t ScoringNetwork::max_width() const { return *std::max_element(sizes_.begin(), sizes_.end()); }

std::span<double> ScoringNetwork::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), sizes_[layer] * sizes_[layer + 1]);
}
std::span<const double> ScoringNetwork::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer),
                                                  sizes_[layer] * sizes_[layer + 1]);
}
std::span<double> ScoringNetwork::biases(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}
std::span<const double> ScoringNetwork::biases(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}

namespace {

// Activations of every layer for one input; acts[0] is the normalized input.
std::vector<std::vector<double>> forward_trace(const ScoringNetwork& net,
                                               std::span<const double> features) {
  if (features.size() != net.input_size())
    throw std::invalid_argument("network input width " + std::to_string(net.input_size()) +
                                " does not match feature width " + std::to_string(features.size()));
  const auto& sizes = net.layer_sizes();
  const auto& norm = net.normalization();
  std::vector<std::vector<double>> acts(sizes.size());
  acts[0].resize(sizes[0]);
  for (std::size_t i = 0; i < sizes[0]; ++i)
    acts[0][i] = (features[i] - norm.offset[i]) / norm.scale[i];
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto w = net.weights(l);
    const auto b = net.biases(l);
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const bool hidden = l + 1 < net.layer_count();
    acts[l + 1].resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < in; ++i) z += w[o * in + i] * acts[l][i];
      acts[l + 1][o] = hidden ? activate(z) : z;
    }
  }
  return acts;
}

}  // namespace

double forward_features(const ScoringNetwork& net, std::span<const double> features) {
  return forward_trace(net, features).back()[0];
}

void backward_features(const ScoringNetwork& net, std::span<const double> features, double upstream,
                       std::span<double> grad) {
  if (grad.size() != net.parameter_count())
    throw std::invalid_argument("gradient buffer does not match parameter count");
  const auto acts = forward_trace(net, features);
  const auto& sizes = net.layer_sizes();
  std::vector<double> delta{upstream};
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const auto w = net.weights(l);
    const std::size_t w_off = net.weight_offset(l);
    const std::size_t b_off = net.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      grad[b_off + o] += delta[o];
      for (std::size_t i = 0; i < in; ++i) grad[w_off + o * in + i] += delta[o] * acts[l][i];
    }
    if (l == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += w[o * in + i] * delta[o];
      const double a = acts[l][i];
      prev[i] = s * (1.0 - a * a);
    }
    delta = std::move(prev);
  }
}

double forward(const ScoringNetwork& net, std::span<const double> x) {
  if (net.input_size() != kFeatureCount)
    throw std::invalid_argument("forward: observation scoring needs a 4-feature network");
  const auto f = extract_features(x).values();
  return forward_features(net, f);
}

std::vector<double> backward(const ScoringNetwork& net, std::span<const double> x, double upstream) {
  if (net.input_size() != kFeatureCount)
    throw std::invalid_argument("backward: observation scoring needs a 4-feature network");
  const auto f = extract_features(x).values();
  std::vector<double> grad(net.parameter_count(), 0.0);
  backward_features(net, f, upstream, grad);
  return grad;
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double bce_loss(double score, int label) {
  // softplus(s) - y*s
  const double softplus = std::max(score, 0.0) + std::log1p(std::exp(-std::abs(score)));
  return softplus - static_cast<double>(label) * score;
}

double bce_gradient(double score, int label) { return sigmoid(score) - static_cast<double>(label); }

void write_network(const ScoringNetwork& net, std::ostream& os) {
  os.write(kNetworkMagic, 8);
  binary::write_u32(os, kNetworkVersion);
  binary::write_u32(os, kActivationTanh);
  binary::write_u64(os, net.layer_sizes().size());
  for (std::size_t s : net.layer_sizes()) binary::write_u64(os, s);
  const auto& norm = net.normalization();
  binary::write_u64(os, norm.width());
  for (double v : norm.offset) binary::write_f64(os, v);
  for (double v : norm.scale) binary::write_f64(os, v);
  binary::write_u64(os, net.parameter_count());
  for (double v : net.parameters()) binary::write_f64(os, v);
}

ScoringNetwork read_network(std::istream& is) {
  binary::expect_magic(is, std::string(kNetworkMagic, 8));
  if (binary::read_u32(is) != kNetworkVersion) throw std::runtime_error("unsupported network version");
  if (binary::read_u32(is) != kActivationTanh) throw std::runtime_error("unsupported activation id");
  const std::uint64_t layers = binary::read_u64(is);
  if (layers < 2 || layers > 1024) throw std::runtime_error("corrupt network layer count");
  std::vector<std::size_t> sizes(layers);
  for (auto& s : sizes) s = binary::read_u64(is);
  ScoringNetwork net(sizes);
  const std::uint64_t width = binary::read_u64(is);
  if (width != net.input_size()) throw std::runtime_error("normalization width does not match input");
  auto& norm = net.normalization();
  for (double& v : norm.offset) v = binary::read_f64(is);
  for (double& v : norm.scale) v = binary::read_f64(is);
  if (binary::read_u64(is) != net.parameter_count())
    throw std::runtime_error("parameter count does not match layer sizes");
  for (double& v : net.parameters()) v = binary::read_f64(is);
  return net;
}

void save_network(const ScoringNetwork& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_network(net, os);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

ScoringNetwork load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_network(is);
}

}  // namespace cfarnet
