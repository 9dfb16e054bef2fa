// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cfarnet/app/cli.hpp"
#include "cfarnet/app/config.hpp"
#include "cfarnet/app/experiment.hpp"
#include "cfarnet/detectors.hpp"
#include "cfarnet/eval.hpp"
#include "cfarnet/mmd.hpp"
#include "cfarnet/training.hpp"
#include "oracles.hpp"

using namespace cfarnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s [%s]\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Null and alternative scores of one detector at sigma in {0.5, 1.0}; shared streams across detectors.
struct Scores {
  std::vector<double> h0_lo, h0_hi, h1_hi;
};

constexpr std::size_t kMcSamples = 100000;
constexpr double kSigmaLo = 0.5, kSigmaHi = 1.0;

Scores score_detector(const BatchScorer& scorer, const Scenario& sc, const Rng& rng) {
  return {score_samples(scorer, sc, {0.0, kSigmaLo}, kMcSamples, rng.split(0)),
          score_samples(scorer, sc, {0.0, kSigmaHi}, kMcSamples, rng.split(1)),
          score_samples_alternative(scorer, sc, kSigmaHi, kMcSamples, rng.split(2))};
}

struct Metrics {
  double ks = 0, fpr_lo = 0, fpr_hi = 0, auc_hi = 0;
  double fpr_gap() const { return std::abs(fpr_lo - fpr_hi); }
};

Metrics metrics(const Scores& s) {
  std::vector<double> pool(s.h0_lo);
  pool.insert(pool.end(), s.h0_hi.begin(), s.h0_hi.end());
  const double gamma = calibrate_threshold(pool, 0.1);
  return {ks_statistic(s.h0_lo, s.h0_hi), estimate_rate(s.h0_lo, gamma).rate,
          estimate_rate(s.h0_hi, gamma).rate, mann_whitney_auc(s.h0_hi, s.h1_hi)};
}

std::string describe(const char* name, const Metrics& m) {
  std::ostringstream os;
  os << name << ": ks=" << fmt("%.4f", m.ks) << " fpr(0.5)=" << fmt("%.4f", m.fpr_lo)
     << " fpr(1.0)=" << fmt("%.4f", m.fpr_hi) << " auc(1.0)=" << fmt("%.4f", m.auc_hi);
  return os.str();
}

struct Trained {
  ScoringNetwork net, cfarnet;
  double seconds = 0;
};

// Default training through the experiment pipeline, so the networks are the ones the CLI produces.
Trained train_defaults(NoiseFamily family, const fs::path& root) {
  app::ExperimentConfig cfg = app::parse_config("{}");
  cfg.scenario.noise = family == NoiseFamily::gaussian ? NoiseModel::gaussian() : NoiseModel::mixture();
  cfg.output_dir = root;
  std::ostringstream log;
  const auto t0 = Clock::now();
  app::run_train(cfg, log);
  const fs::path dir = app::scenario_dir(cfg);
  return {load_network(dir / "net.bin"), load_network(dir / "cfarnet.bin"), seconds_since(t0)};
}

void criterion1() {
  const auto t0 = Clock::now();
  Scenario sc;
  const std::vector<ParamVector> grid{{0, kSigmaLo}, {0, kSigmaHi}};
  const double ks = cfar_deviation(glrt_scorer(), sc, grid, 200000, Rng(101), StreamMode::independent);
  const double t = seconds_since(t0);
  report(1, ks < 0.01 && t < 10.0, "GLRT is CFAR (KS < 0.01, < 10 s)",
         "ks=" + fmt("%.4f", ks) + " time=" + fmt("%.2f", t) + "s");
}

void criteria2to5(const fs::path& work) {
  const Trained gauss = train_defaults(NoiseFamily::gaussian, work / "train");
  Scenario sc;
  const Rng eval_rng(202);
  const Metrics glrt = metrics(score_detector(glrt_scorer(), sc, eval_rng));
  const Metrics net = metrics(score_detector(network_scorer(gauss.net), sc, eval_rng));
  const Metrics cfar = metrics(score_detector(network_scorer(gauss.cfarnet), sc, eval_rng));
  std::printf("info: gaussian training took %.1fs\ninfo: %s\ninfo: %s\ninfo: %s\n", gauss.seconds,
              describe("glrt", glrt).c_str(), describe("net", net).c_str(),
              describe("cfarnet", cfar).c_str());

  report(2, net.ks > 0.05 && net.fpr_gap() > 0.03, "NET is not CFAR (KS > 0.05, FPR gap > 0.03)",
         "ks=" + fmt("%.4f", net.ks) + " gap=" + fmt("%.4f", net.fpr_gap()));
  report(3, cfar.ks <= 0.5 * net.ks && cfar.fpr_gap() < 0.02,
         "CFAR-NET is near CFAR (KS <= 0.5 KS(NET), FPR gap < 0.02)",
         "ks=" + fmt("%.4f", cfar.ks) + " bound=" + fmt("%.4f", 0.5 * net.ks) +
             " gap=" + fmt("%.4f", cfar.fpr_gap()));
  report(4, net.auc_hi >= glrt.auc_hi - 0.02 && cfar.auc_hi >= glrt.auc_hi - 0.03,
         "accuracy parity under Gaussian noise",
         "glrt=" + fmt("%.4f", glrt.auc_hi) + " net=" + fmt("%.4f", net.auc_hi) +
             " cfarnet=" + fmt("%.4f", cfar.auc_hi));

  const Trained mix = train_defaults(NoiseFamily::mixture, work / "train");
  Scenario msc;
  msc.noise = NoiseModel::mixture();
  const Metrics mglrt = metrics(score_detector(glrt_scorer(), msc, eval_rng));
  const Metrics mnet = metrics(score_detector(network_scorer(mix.net), msc, eval_rng));
  const Metrics mcfar = metrics(score_detector(network_scorer(mix.cfarnet), msc, eval_rng));
  std::printf("info: mixture training took %.1fs\ninfo: %s\ninfo: %s\ninfo: %s\n", mix.seconds,
              describe("glrt", mglrt).c_str(), describe("net", mnet).c_str(),
              describe("cfarnet", mcfar).c_str());
  report(5, mnet.auc_hi >= mglrt.auc_hi + 0.03, "NET beats the Gaussian GLRT under mixture noise",
         "glrt=" + fmt("%.4f", mglrt.auc_hi) + " net=" + fmt("%.4f", mnet.auc_hi));
}

void criterion6() {
  const auto t0 = Clock::now();
  Rng rng(606);
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    // 3 null groups and 2 alternative records, M = 3 replicates each.
    const std::size_t m = 3, records = 5;
    std::vector<int> labels{0, 1, 0, 1, 0};
    std::vector<double> table(records * m * kFeatureCount);
    for (double& v : table) v = rng.normal();
    const FeatureSet fs(kFeatureCount, m, labels, table);
    ScoringNetwork net = ScoringNetwork::glorot({4, 16, 16, 1}, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
      for (double& b : net.biases(l)) b = 0.2 * rng.normal();
    net.normalization() = FeatureNormalization::fit(table, kFeatureCount);

    std::vector<std::size_t> batch(records);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    std::vector<double> null_scores;
    for (std::size_t r : batch)
      if (labels[r] == 0)
        for (std::size_t j = 0; j < m; ++j)
          null_scores.push_back(forward_features(net, fs.record_rows(r).subspan(j * kFeatureCount, kFeatureCount)));
    const KernelConfig kernel = median_heuristic_bandwidth(null_scores);  // frozen
    const double alpha = TrainConfig{}.penalty_weight;
    const auto pairs = all_pairs(3);

    for (auto est : {MmdEstimator::unbiased, MmdEstimator::biased}) {
      std::vector<double> grad(net.parameter_count(), 0.0);
      loss_and_gradient(net, fs, batch, alpha, kernel, pairs, grad, est);
      const std::vector<double> start(net.parameters().begin(), net.parameters().end());
      auto f = [&](std::span<const double> p) {
        ScoringNetwork probe = net;
        std::copy(p.begin(), p.end(), probe.parameters().begin());
        return total_loss(probe, fs, batch, alpha, kernel, est).total;
      };
      worst = std::max(worst, oracle::max_relative_error(grad, oracle::central_difference(f, start)));
    }
  }
  const double t = seconds_since(t0);
  report(6, worst < 1e-5 && t < 5.0, "objective gradient matches central differences (< 1e-5, < 5 s)",
         "max_rel_err=" + fmt("%.2e", worst) + " time=" + fmt("%.2f", t) + "s");
}

void criterion7() {
  double worst_closed = 0;
  auto closed = [&](std::vector<double> x, std::vector<double> y, double h) {
    // Direct kernel expression, independent of the library's kernel sums.
    double kxx = 0, kyy = 0, kxy = 0;
    for (double a : x)
      for (double b : x) kxx += std::exp(-(a - b) * (a - b) / (2 * h * h));
    for (double a : y)
      for (double b : y) kyy += std::exp(-(a - b) * (a - b) / (2 * h * h));
    for (double a : x)
      for (double b : y) kxy += std::exp(-(a - b) * (a - b) / (2 * h * h));
    const double n = x.size(), mm = y.size();
    const double expected = kxx / (n * n) + kyy / (mm * mm) - 2 * kxy / (n * mm);
    worst_closed = std::max(worst_closed, std::abs(mmd_biased(x, y, {h}) - expected));
  };
  closed({0}, {1}, 1);
  worst_closed = std::max(worst_closed, std::abs(mmd_biased(std::vector<double>{0}, std::vector<double>{1}, {1}) -
                                                 (2 - 2 * std::exp(-0.5))));
  Rng rng(707);
  for (int k = 0; k < 200; ++k) {
    const double h = rng.uniform(0.1, 3.0);
    closed({rng.normal()}, {rng.normal()}, h);
    closed({rng.normal(), rng.normal()}, {rng.normal()}, h);
    closed({rng.normal(), rng.normal()}, {rng.normal(), rng.normal()}, h);
  }
  double min_value = 1e300, worst_asym = 0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> x(1 + rng.index(16)), y(1 + rng.index(16));
    const double shift = rng.uniform(-1, 1), scale = rng.uniform(0.2, 3);
    for (double& v : x) v = rng.normal();
    for (double& v : y) v = shift + scale * rng.normal();
    const KernelConfig cfg{rng.uniform(0.05, 5.0)};
    const double d = mmd_biased(x, y, cfg);
    min_value = std::min(min_value, d);
    worst_asym = std::max(worst_asym, std::abs(d - mmd_biased(y, x, cfg)));
  }
  report(7, worst_closed <= 1e-12 && min_value >= 0.0 && worst_asym <= 1e-12,
         "MMD closed forms, non-negativity and symmetry",
         "closed_err=" + fmt("%.1e", worst_closed) + " min=" + fmt("%.2e", min_value) +
             " asym=" + fmt("%.1e", worst_asym));
}

void criterion8() {
  Rng rng(808);
  const std::size_t n = 20000;
  std::vector<int> labels(n);
  std::vector<double> table(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    table[i] = labels[i] + rng.normal();
  }
  TrainConfig cfg;
  cfg.records = n;
  cfg.replicates = 1;
  cfg.penalty_weight = 0.0;
  cfg.epochs = 20;
  const TrainResult r = train_on_features(FeatureSet(1, 1, labels, table), cfg);
  std::vector<double> h0(100000), h1(100000);
  for (double& s : h0) s = forward_features(r.network, std::vector<double>{rng.normal()});
  for (double& s : h1) s = forward_features(r.network, std::vector<double>{1.0 + rng.normal()});
  const double auc = mann_whitney_auc(h0, h1);
  const double analytic = oracle::normal_cdf(1.0 / std::sqrt(2.0));
  report(8, std::abs(auc - analytic) < 0.02, "trained classifier reaches the LRT AUC on a unit mean shift",
         "auc=" + fmt("%.4f", auc) + " lrt=" + fmt("%.4f", analytic));
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void criterion9(const fs::path& work) {
  double worst_time = 0;
  bool ok = true;
  std::vector<fs::path> dirs{work / "quick_a", work / "quick_b"};
  for (const fs::path& dir : dirs) {
    fs::remove_all(dir);
    const std::string out = dir.string();
    const char* argv[] = {"cfarnet", "reproduce-fig1", "--quick", "--out", out.c_str()};
    std::ostringstream log, err;
    const auto t0 = Clock::now();
    ok = ok && app::run_cli(5, argv, log, err) == 0;
    worst_time = std::max(worst_time, seconds_since(t0));
  }
  std::size_t files = 0, mismatched = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dirs[0]);
    if (rel == "run_metadata.json") continue;
    ++files;
    if (read_file(entry.path()) != read_file(dirs[1] / rel)) ++mismatched;
  }
  for (const auto& entry : fs::recursive_directory_iterator(dirs[1]))
    if (entry.is_regular_file() && !fs::exists(dirs[0] / fs::relative(entry.path(), dirs[1]))) ++mismatched;
  report(9, ok && files > 0 && mismatched == 0 && worst_time < 600.0,
         "reproduce-fig1 --quick is byte-reproducible and under 10 minutes",
         "files=" + std::to_string(files) + " mismatched=" + std::to_string(mismatched) +
             " time=" + fmt("%.1f", worst_time) + "s");
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "cfarnet_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::vector<std::function<void()>> steps{
      criterion1, [&] { criteria2to5(work); }, criterion6, criterion7, criterion8, [&] { criterion9(work); }};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL error: %s\n", e.what());
    }
  }
  fs::remove_all(work);
  std::printf("%s: %d failing criteria\n", failures == 0 ? "OK" : "NOT OK", failures);
  return failures == 0 ? 0 : 1;
}
