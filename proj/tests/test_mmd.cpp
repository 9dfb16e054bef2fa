#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cfarnet/mmd.hpp"
#include "cfarnet/random.hpp"
#include "oracles.hpp"

using namespace cfarnet;

namespace {

std::vector<double> random_sample(Rng& rng, std::size_t n, double spread = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = spread * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("rbf_kernel values") {
  CHECK(rbf_kernel(3.7, 3.7, {0.3}) == 1.0);
  CHECK(rbf_kernel(0, 1, {1}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(rbf_kernel(0, 1, {1}) == doctest::Approx(0.606531).epsilon(1e-6));
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const double a = rng.normal(), b = rng.normal(), h = rng.uniform(0.1, 3);
    CHECK(std::abs(rbf_kernel(a, b, {h}) - rbf_kernel(b, a, {h})) <= 1e-15);
  }
  CHECK_THROWS_AS(rbf_kernel(0, 1, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(0, 1, {-1.0}), std::invalid_argument);
}

TEST_CASE("mmd_biased closed forms") {
  const std::vector<double> zero{0}, one{1}, zz{0, 0};
  CHECK(mmd_biased(zero, one, {1}) == doctest::Approx(2 - 2 * std::exp(-0.5)).epsilon(1e-14));
  CHECK(mmd_biased(zero, one, {1}) == doctest::Approx(0.786939).epsilon(1e-6));
  CHECK(std::abs(mmd_biased(zz, zz, {1})) < 1e-12);
  const std::vector<double> list{0.1, -2.0, 3.5, 0.7};
  CHECK(std::abs(mmd_biased(list, list, {0.8})) < 1e-12);
  CHECK_THROWS_AS(mmd_biased(std::vector<double>{}, one, {1}), std::invalid_argument);
}

TEST_CASE("mmd_biased matches the direct triple sum") {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_sample(rng, 1 + rng.index(20));
    const auto y = random_sample(rng, 1 + rng.index(20), 2.0);
    const double h = rng.uniform(0.2, 2.0);
    CHECK(mmd_biased(x, y, {h}) == doctest::Approx(oracle::mmd_v(x, y, h)).epsilon(1e-12));
  }
}

TEST_CASE("mmd_biased properties: non-negative, symmetric, permutation invariant") {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    auto x = random_sample(rng, 1 + rng.index(12));
    const auto y = random_sample(rng, 1 + rng.index(12), rng.uniform(0.5, 2));
    const KernelConfig cfg{rng.uniform(0.05, 5.0)};
    const double d = mmd_biased(x, y, cfg);
    CHECK(d >= -1e-15);
    CHECK(std::abs(d - mmd_biased(y, x, cfg)) < 1e-12);
    std::shuffle(x.begin(), x.end(), rng.engine());
    CHECK(std::abs(d - mmd_biased(x, y, cfg)) < 1e-12);
  }
}

TEST_CASE("mmd_biased bandwidth limits") {
  const std::vector<double> x{0.0, 1.0, 2.5}, y{0.3, -1.2};
  const double wide = mmd_biased(x, y, {1e3});
  const double mid = mmd_biased(x, y, {1});
  const double narrow = mmd_biased(x, y, {1e-3});
  CHECK(wide < 1e-5);
  CHECK(wide < mid);
  CHECK(mid < narrow);
  // As h -> 0 only the diagonal terms survive: 1/N + 1/M.
  CHECK(narrow == doctest::Approx(1.0 / 3 + 1.0 / 2).epsilon(1e-12));
}

TEST_CASE("mmd_unbiased against the direct off-diagonal sum") {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_sample(rng, 2 + rng.index(10));
    const auto y = random_sample(rng, 2 + rng.index(10), 1.5);
    const double h = rng.uniform(0.2, 2.0);
    double kxx = 0, kyy = 0, kxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        if (i != j) kxx += oracle::rbf(x[i], x[j], h);
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = 0; j < y.size(); ++j)
        if (i != j) kyy += oracle::rbf(y[i], y[j], h);
    for (double a : x)
      for (double b : y) kxy += oracle::rbf(a, b, h);
    const double n = x.size(), m = y.size();
    const double expected = kxx / (n * (n - 1)) + kyy / (m * (m - 1)) - 2 * kxy / (n * m);
    CHECK(mmd_unbiased(x, y, {h}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(mmd(x, y, {h}, MmdEstimator::unbiased) == mmd_unbiased(x, y, {h}));
  }
  CHECK_THROWS_AS(mmd_unbiased(std::vector<double>{1}, std::vector<double>{1, 2}, {1}),
                  std::invalid_argument);
}

TEST_CASE("mmd_unbiased is centred for samples of one distribution") {
  Rng rng(5);
  double sum = 0;
  const int trials = 4000;
  for (int k = 0; k < trials; ++k) {
    const auto x = random_sample(rng, 10), y = random_sample(rng, 10);
    sum += mmd_unbiased(x, y, {1});
  }
  CHECK(std::abs(sum / trials) < 2e-3);
}

TEST_CASE("mmd_gradient: zero at identical samples") {
  const std::vector<double> x{0.4, -1.0, 2.0};
  const auto g = mmd_gradient(x, x, {0.9});
  for (double v : g.first) CHECK(std::abs(v) < 1e-12);
  for (double v : g.second) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("mmd_gradient matches central differences for both estimators") {
  Rng rng(6);
  for (auto est : {MmdEstimator::biased, MmdEstimator::unbiased}) {
    for (int k = 0; k < 30; ++k) {
      const auto x = random_sample(rng, 2 + rng.index(8));
      const auto y = random_sample(rng, 2 + rng.index(8), 1.3);
      const KernelConfig cfg{rng.uniform(0.5, 2.0)};
      const auto g = mmd_gradient(x, y, cfg, est);
      std::vector<double> joint(x);
      joint.insert(joint.end(), y.begin(), y.end());
      auto f = [&](std::span<const double> p) {
        return mmd(p.first(x.size()), p.subspan(x.size()), cfg, est);
      };
      const auto fd = oracle::central_difference(f, joint);
      std::vector<double> analytic(g.first);
      analytic.insert(analytic.end(), g.second.begin(), g.second.end());
      CHECK(oracle::max_relative_error(analytic, fd) < 1e-5);
    }
  }
}

TEST_CASE("accumulate_mmd_gradient scales and adds") {
  const std::vector<double> x{0.0, 1.0}, y{0.5, 2.0, -1.0};
  const auto g = mmd_gradient(x, y, {1});
  std::vector<double> gx(2, 1.0), gy(3, -1.0);
  accumulate_mmd_gradient(x, y, {1}, 2.5, gx, gy);
  for (std::size_t k = 0; k < 2; ++k) CHECK(gx[k] == doctest::Approx(1.0 + 2.5 * g.first[k]));
  for (std::size_t k = 0; k < 3; ++k) CHECK(gy[k] == doctest::Approx(-1.0 + 2.5 * g.second[k]));
}

TEST_CASE("median_heuristic_bandwidth") {
  CHECK(median_heuristic_bandwidth(std::vector<double>{0, 2}).bandwidth == 2.0);
  CHECK(median_heuristic_bandwidth(std::vector<double>{5, 5, 5}).bandwidth == 1.0);
  CHECK(median_heuristic_bandwidth(std::vector<double>{0, 1, 2}).bandwidth == 1.0);
  CHECK(median_heuristic_bandwidth(std::vector<double>{0, 1, 3, 7}).bandwidth == 3.5);
  CHECK_THROWS_AS(median_heuristic_bandwidth(std::vector<double>{1}), std::invalid_argument);
}
