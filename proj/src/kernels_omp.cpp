#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cfarnet/kernels.hpp"

namespace cfarnet::kernels {

namespace {

// Below this many kernel evaluations the gram loops stay on one thread.
constexpr std::size_t kParallelGramWork = 1 << 14;

std::size_t block_count(std::size_t rows) { return (rows + kBlock - 1) / kBlock; }

// Per-block activation layout: layer l occupies sizes[l] rows of kBlock,
// column-major within the block.
struct Layout {
  std::vector<std::size_t> offset;
  std::size_t stride = 0;

  explicit Layout(const ScoringNetwork& net) {
    for (std::size_t s : net.layer_sizes()) {
      offset.push_back(stride);
      stride += s * kBlock;
    }
  }
};

struct Scratch {
  std::vector<double> delta;
  std::vector<double> prev;

  explicit Scratch(const ScoringNetwork& net)
      : delta(net.max_width() * kBlock, 0.0), prev(net.max_width() * kBlock, 0.0) {}
};

void block_forward(const ScoringNetwork& net, const double* features, std::size_t rows,
                   const std::vector<std::size_t>& offset, double* acts) {
  const auto& sizes = net.layer_sizes();
  const auto& norm = net.normalization();
  const std::size_t width = sizes[0];
  double* in = acts + offset[0];
  for (std::size_t i = 0; i < width; ++i) {
    const double off = norm.offset[i];
    const double inv = 1.0 / norm.scale[i];
    for (std::size_t b = 0; b < rows; ++b) in[i * kBlock + b] = (features[b * width + i] - off) * inv;
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const std::size_t n_in = sizes[l], n_out = sizes[l + 1];
    const double* w = net.weights(l).data();
    const double* bias = net.biases(l).data();
    const double* a = acts + offset[l];
    double* z = acts + offset[l + 1];
    const bool hidden = l + 1 < net.layer_count();
    for (std::size_t o = 0; o < n_out; ++o) {
      double* zo = z + o * kBlock;
      for (std::size_t b = 0; b < rows; ++b) zo[b] = bias[o];
      for (std::size_t i = 0; i < n_in; ++i) {
        const double wi = w[o * n_in + i];
        const double* ai = a + i * kBlock;
        for (std::size_t b = 0; b < rows; ++b) zo[b] += wi * ai[b];
      }
      if (hidden)
        for (std::size_t b = 0; b < rows; ++b) zo[b] = activate(zo[b]);
    }
  }
}

void block_backward(const ScoringNetwork& net, const double* upstream, std::size_t rows,
                    const std::vector<std::size_t>& offset, const double* acts, Scratch& ws,
                    double* grad) {
  const auto& sizes = net.layer_sizes();
  double* delta = ws.delta.data();
  for (std::size_t b = 0; b < rows; ++b) delta[b] = upstream[b];
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const std::size_t n_in = sizes[l], n_out = sizes[l + 1];
    const double* w = net.weights(l).data();
    const double* a = acts + offset[l];
    double* gw = grad + net.weight_offset(l);
    double* gb = grad + net.bias_offset(l);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* d = delta + o * kBlock;
      double sb = 0.0;
      for (std::size_t b = 0; b < rows; ++b) sb += d[b];
      gb[o] += sb;
      for (std::size_t i = 0; i < n_in; ++i) {
        const double* ai = a + i * kBlock;
        double s = 0.0;
        for (std::size_t b = 0; b < rows; ++b) s += d[b] * ai[b];
        gw[o * n_in + i] += s;
      }
    }
    if (l == 0) break;
    double* prev = ws.prev.data();
    for (std::size_t i = 0; i < n_in; ++i) {
      double* pi = prev + i * kBlock;
      for (std::size_t b = 0; b < rows; ++b) pi[b] = 0.0;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double wi = w[o * n_in + i];
        const double* d = delta + o * kBlock;
        for (std::size_t b = 0; b < rows; ++b) pi[b] += wi * d[b];
      }
      const double* ai = a + i * kBlock;
      for (std::size_t b = 0; b < rows; ++b) pi[b] *= 1.0 - ai[b] * ai[b];
    }
    std::swap(ws.delta, ws.prev);
    delta = ws.delta.data();
  }
}

void check_rows(const ScoringNetwork& net, std::span<const double> features, std::size_t rows) {
  if (features.size() != rows * net.input_size())
    throw std::invalid_argument("feature table does not match network input width");
}

}  // namespace

namespace omp {

double rbf_gram_sum(std::span<const double> a, std::span<const double> b, double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const std::size_t blocks = block_count(a.size());
  std::vector<double> partial(blocks, 0.0);
  const bool parallel = a.size() * b.size() >= kParallelGramWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
    const std::size_t lo = blk * kBlock, hi = std::min(a.size(), lo + kBlock);
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double ai = a[i];
      for (double bj : b) {
        const double d = ai - bj;
        sum += std::exp(-d * d * inv);
      }
    }
    partial[blk] = sum;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void rbf_gram_gradient(std::span<const double> a, std::span<const double> b, double bandwidth,
                       double weight, std::span<double> grad_a, std::span<double> grad_b) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  const std::size_t blocks = block_count(a.size());
  std::vector<double> ga(a.size(), 0.0);
  std::vector<double> gb(blocks * b.size(), 0.0);
  const bool parallel = a.size() * b.size() >= kParallelGramWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
    const std::size_t lo = blk * kBlock, hi = std::min(a.size(), lo + kBlock);
    double* gbb = gb.data() + blk * b.size();
    for (std::size_t i = lo; i < hi; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double d = a[i] - b[j];
        const double dk = -d * inv_h2 * std::exp(-d * d * inv) * weight;
        gi += dk;
        gbb[j] -= dk;
      }
      ga[i] = gi;
    }
  }
  for (std::size_t i = 0; i < a.size(); ++i) grad_a[i] += ga[i];
  for (std::size_t blk = 0; blk < blocks; ++blk)
    for (std::size_t j = 0; j < b.size(); ++j) grad_b[j] += gb[blk * b.size() + j];
}

void extract_features(std::span<const double> observations, std::size_t dim,
                      std::span<double> features) {
  const std::size_t count = observations.size() / dim;
  if (features.size() != count * kFeatureCount)
    throw std::invalid_argument("extract_features: output buffer has the wrong size");
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(count); ++r) {
    const auto f = cfarnet::extract_features(observations.subspan(r * dim, dim)).values();
    for (std::size_t c = 0; c < kFeatureCount; ++c) features[r * kFeatureCount + c] = f[c];
  }
}

void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores) {
  const std::size_t rows = scores.size();
  check_rows(net, features, rows);
  const std::size_t width = net.input_size();
  const std::size_t blocks = block_count(rows);
  const Layout layout(net);
  const std::size_t out_offset = layout.offset.back();
#pragma omp parallel
  {
    std::vector<double> acts(layout.stride);
#pragma omp for schedule(static)
    for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
      const std::size_t lo = blk * kBlock, n = std::min(rows - lo, kBlock);
      block_forward(net, features.data() + lo * width, n, layout.offset, acts.data());
      for (std::size_t b = 0; b < n; ++b) scores[lo + b] = acts[out_offset + b];
    }
  }
}

void forward(const ScoringNetwork& net, std::span<const double> features, std::span<double> scores,
             ActivationCache& cache) {
  const std::size_t rows = scores.size();
  check_rows(net, features, rows);
  const std::size_t width = net.input_size();
  const std::size_t blocks = block_count(rows);
  const Layout layout(net);
  cache.rows_ = rows;
  cache.block_stride_ = layout.stride;
  cache.layer_offset_ = layout.offset;
  cache.acts_.resize(blocks * layout.stride);
  const std::size_t out_offset = layout.offset.back();
#pragma omp parallel for schedule(static)
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
    const std::size_t lo = blk * kBlock, n = std::min(rows - lo, kBlock);
    double* acts = cache.acts_.data() + blk * layout.stride;
    block_forward(net, features.data() + lo * width, n, layout.offset, acts);
    for (std::size_t b = 0; b < n; ++b) scores[lo + b] = acts[out_offset + b];
  }
}

void accumulate_gradient(const ScoringNetwork& net, const ActivationCache& cache,
                         std::span<const double> upstream, std::span<double> grad) {
  const std::size_t rows = upstream.size();
  if (rows != cache.rows_) throw std::invalid_argument("upstream does not match cached forward pass");
  if (grad.size() != net.parameter_count())
    throw std::invalid_argument("gradient buffer does not match parameter count");
  if (cache.layer_offset_ != Layout(net).offset)
    throw std::invalid_argument("activation cache was recorded for a different network shape");
  const std::size_t blocks = block_count(rows);
  const std::size_t p = net.parameter_count();
  std::vector<double> partial(blocks * p, 0.0);
#pragma omp parallel
  {
    Scratch ws(net);
#pragma omp for schedule(static)
    for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
      const std::size_t lo = blk * kBlock, n = std::min(rows - lo, kBlock);
      block_backward(net, upstream.data() + lo, n, cache.layer_offset_,
                     cache.acts_.data() + blk * cache.block_stride_, ws, partial.data() + blk * p);
    }
  }
  for (std::size_t blk = 0; blk < blocks; ++blk)
    for (std::size_t k = 0; k < p; ++k) grad[k] += partial[blk * p + k];
}

void accumulate_gradient(const ScoringNetwork& net, std::span<const double> features,
                         std::span<const double> upstream, std::span<double> grad) {
  ActivationCache cache;
  std::vector<double> scores(upstream.size());
  forward(net, features, scores, cache);
  accumulate_gradient(net, cache, upstream, grad);
}

}  // namespace omp

void set_thread_limit(int threads) {
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

int thread_limit() { return omp_get_max_threads(); }

}  // namespace cfarnet::kernels
