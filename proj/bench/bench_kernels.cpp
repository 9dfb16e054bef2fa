// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "cfarnet/kernels.hpp"
#include "cfarnet/model.hpp"
#include "cfarnet/net.hpp"

namespace {

using namespace cfarnet;

struct Batch {
  ScoringNetwork net;
  std::vector<double> observations;
  std::vector<double> features;
  std::vector<double> upstream;
};

Batch make_batch(std::size_t rows) {
  Rng rng(42);
  Batch b{ScoringNetwork::glorot({kFeatureCount, 16, 16, 1}, rng), {}, {}, {}};
  Scenario sc;
  b.observations.resize(rows * sc.dim);
  for (std::size_t r = 0; r < rows; ++r)
    sample_observation_into(sc, {0.0, 0.75}, std::span<double>(b.observations.data() + r * sc.dim, sc.dim), rng);
  b.features.resize(rows * kFeatureCount);
  kernels::serial::extract_features(b.observations, sc.dim, b.features);
  for (std::size_t r = 0; r < rows; ++r) b.upstream.push_back(rng.uniform(-1.0, 1.0));
  return b;
}

std::vector<double> scores_of(std::size_t n) {
  Rng rng(7);
  std::vector<double> s(n);
  for (double& v : s) v = rng.normal();
  return s;
}

template <auto Kernel>
void BM_gram_sum(benchmark::State& state) {
  const auto a = scores_of(state.range(0));
  const auto b = scores_of(state.range(0) + 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b, 0.7));
  state.SetItemsProcessed(state.iterations() * a.size() * b.size());
}

template <auto Kernel>
void BM_features(benchmark::State& state) {
  Batch b = make_batch(state.range(0));
  for (auto _ : state) {
    Kernel(b.observations, 16, b.features);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_forward(benchmark::State& state) {
  Batch b = make_batch(state.range(0));
  std::vector<double> scores(state.range(0));
  for (auto _ : state) {
    Kernel(b.net, b.features, scores);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_gradient(benchmark::State& state) {
  Batch b = make_batch(state.range(0));
  std::vector<double> grad(b.net.parameter_count());
  for (auto _ : state) {
    Kernel(b.net, b.features, b.upstream, grad);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void omp_forward(const ScoringNetwork& net, std::span<const double> f, std::span<double> s) {
  kernels::omp::forward(net, f, s);
}
void omp_gradient(const ScoringNetwork& net, std::span<const double> f, std::span<const double> u,
                  std::span<double> g) {
  kernels::omp::accumulate_gradient(net, f, u, g);
}

}  // namespace

BENCHMARK(BM_gram_sum<cfarnet::kernels::serial::rbf_gram_sum>)->Name("gram_sum/serial")->Arg(10)->Arg(1000);
BENCHMARK(BM_gram_sum<cfarnet::kernels::omp::rbf_gram_sum>)->Name("gram_sum/omp")->Arg(10)->Arg(1000);
BENCHMARK(BM_features<cfarnet::kernels::serial::extract_features>)->Name("features/serial")->Arg(2560)->Arg(100000);
BENCHMARK(BM_features<cfarnet::kernels::omp::extract_features>)->Name("features/omp")->Arg(2560)->Arg(100000);
BENCHMARK(BM_forward<cfarnet::kernels::serial::forward>)->Name("forward/serial")->Arg(2560)->Arg(100000);
BENCHMARK(BM_forward<omp_forward>)->Name("forward/omp")->Arg(2560)->Arg(100000);
BENCHMARK(BM_gradient<cfarnet::kernels::serial::accumulate_gradient>)->Name("gradient/serial")->Arg(2560);
BENCHMARK(BM_gradient<omp_gradient>)->Name("gradient/omp")->Arg(2560);

BENCHMARK_MAIN();
