#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfarnet/training.hpp"
#include "oracles.hpp"

using namespace cfarnet;

namespace {

// Small feature set: `nulls` records with label 0 followed by `alts` with label 1.
FeatureSet random_features(Rng& rng, std::size_t nulls, std::size_t alts, std::size_t m) {
  std::vector<int> labels(nulls, 0);
  labels.insert(labels.end(), alts, 1);
  std::vector<double> table(labels.size() * m * kFeatureCount);
  for (double& v : table) v = rng.normal();
  return FeatureSet(kFeatureCount, m, labels, table);
}

ScoringNetwork random_net(Rng& rng) {
  ScoringNetwork net = ScoringNetwork::glorot({4, 16, 16, 1}, rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (double& b : net.biases(l)) b = 0.2 * rng.normal();
  return net;
}

std::vector<std::size_t> iota_batch(std::size_t n) {
  std::vector<std::size_t> b(n);
  std::iota(b.begin(), b.end(), std::size_t{0});
  return b;
}

}  // namespace

TEST_CASE("cfar_penalty examples") {
  const std::vector<std::vector<double>> one{{0.1, 0.4}};
  CHECK(cfar_penalty(one, {1}) == 0.0);
  const std::vector<std::vector<double>> same{{0.1, 0.4, 2.0}, {0.1, 0.4, 2.0}};
  CHECK(std::abs(cfar_penalty(same, {1})) < 1e-12);
  const std::vector<std::vector<double>> singletons{{0}, {1}};
  CHECK(cfar_penalty(singletons, {1}) == doctest::Approx(0.786939).epsilon(1e-6));
  const std::vector<std::vector<double>> with_empty{{0}, {}};
  CHECK_THROWS_AS(cfar_penalty(with_empty, {1}), std::invalid_argument);
}

TEST_CASE("cfar_penalty is invariant to group and within-group order") {
  Rng rng(1);
  for (auto est : {MmdEstimator::biased, MmdEstimator::unbiased}) {
    std::vector<std::vector<double>> groups(4, std::vector<double>(5));
    for (auto& g : groups)
      for (double& v : g) v = rng.normal();
    const double base = cfar_penalty(groups, {0.8}, est);
    std::reverse(groups.begin(), groups.end());
    for (auto& g : groups) std::shuffle(g.begin(), g.end(), rng.engine());
    CHECK(cfar_penalty(groups, {0.8}, est) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("fake_prior_threshold") {
  FakePrior p;
  p.p1 = 0.5;
  CHECK(fake_prior_threshold(p) == 1.0);
  p.p1 = 0.25;
  CHECK(fake_prior_threshold(p) == doctest::Approx(3.0));
  p.p1 = 0.9;
  CHECK(fake_prior_threshold(p) == doctest::Approx(1.0 / 9));
  p.p1 = 0.0;
  CHECK_THROWS_AS(fake_prior_threshold(p), std::invalid_argument);
  p.p1 = 1.0;
  CHECK_THROWS_AS(fake_prior_threshold(p), std::invalid_argument);
}

TEST_CASE("total_loss with alpha = 0 is the mean cross-entropy") {
  Rng rng(2);
  const FeatureSet fs = random_features(rng, 5, 7, 3);
  const ScoringNetwork net = random_net(rng);
  const std::vector<std::size_t> batch{0, 3, 5, 6, 11, 2};
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t rec : batch) {
    const auto rows = fs.record_rows(rec);
    for (std::size_t j = 0; j < fs.replicates(); ++j) {
      sum += bce_loss(forward_features(net, rows.subspan(j * kFeatureCount, kFeatureCount)),
                      fs.label(rec));
      ++count;
    }
  }
  const LossTerms t = total_loss(net, fs, batch, 0.0, {1.0});
  CHECK(t.classification == doctest::Approx(sum / count).epsilon(1e-14));
  CHECK(t.total == t.classification);
}

TEST_CASE("total_loss on a batch without null records has no penalty") {
  Rng rng(3);
  const FeatureSet fs = random_features(rng, 2, 6, 3);
  const ScoringNetwork net = random_net(rng);
  const std::vector<std::size_t> batch{2, 3, 4, 7};
  const LossTerms t = total_loss(net, fs, batch, 5.0, {1.0}, MmdEstimator::unbiased);
  CHECK(t.penalty == 0.0);
  CHECK(t.total == t.classification);
}

TEST_CASE("total_loss with a dataset batch") {
  Scenario sc;
  const Dataset ds = generate_dataset(sc, FakePrior::uniform_over(sc), 30, 2, Rng(3));
  Rng rng(4);
  const ScoringNetwork net = random_net(rng);
  const auto batch = iota_batch(30);
  const double direct = total_loss(net, ds, batch, 1.0, {0.5});
  CHECK(direct == total_loss(net, FeatureSet::from_dataset(ds), batch, 1.0, {0.5}).total);
}

TEST_CASE("loss_and_gradient matches central differences") {
  Rng rng(5);
  for (auto est : {MmdEstimator::biased, MmdEstimator::unbiased}) {
    for (int k = 0; k < 10; ++k) {
      const FeatureSet fs = random_features(rng, 3, 3, 3);
      ScoringNetwork net = random_net(rng);
      const auto batch = iota_batch(fs.size());
      const KernelConfig kernel{rng.uniform(0.3, 1.5)};
      const double alpha = rng.uniform(0.5, 4.0);
      std::vector<double> grad(net.parameter_count(), 0.0);
      const auto pairs = all_pairs(3);
      const LossTerms terms = loss_and_gradient(net, fs, batch, alpha, kernel, pairs, grad, est);
      CHECK(terms.total == doctest::Approx(total_loss(net, fs, batch, alpha, kernel, est).total));
      const std::vector<double> start(net.parameters().begin(), net.parameters().end());
      auto f = [&](std::span<const double> p) {
        ScoringNetwork probe = net;
        std::copy(p.begin(), p.end(), probe.parameters().begin());
        return total_loss(probe, fs, batch, alpha, kernel, est).total;
      };
      CHECK(oracle::max_relative_error(grad, oracle::central_difference(f, start)) < 1e-5);
    }
  }
}

TEST_CASE("adam first step moves each parameter by the learning rate") {
  AdamOptimizer adam(3, 0.01);
  std::vector<double> p{1.0, -1.0, 0.5};
  const std::vector<double> g{2.0, -0.5, 1e-3};
  adam.step(p, g);
  CHECK(p[0] == doctest::Approx(0.99));
  CHECK(p[1] == doctest::Approx(-0.99));
  CHECK(p[2] == doctest::Approx(0.49).epsilon(1e-4));
  CHECK(adam.steps() == 1);
}

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.records = 600;
  cfg.replicates = 4;
  cfg.epochs = 12;
  cfg.batch_size = 64;
  cfg.penalty_weight = 0.0;
  return cfg;
}

Dataset small_dataset(const TrainConfig& cfg, std::uint64_t seed) {
  Scenario sc;
  return generate_dataset(sc, FakePrior::uniform_over(sc), cfg.records, cfg.replicates, Rng(seed));
}

}  // namespace

TEST_CASE("train_detector: alpha = 0 never evaluates the penalty") {
  TrainConfig cfg = small_config();
  cfg.replicates = 1;
  cfg.epochs = 2;
  const TrainResult r = train_detector(small_dataset(cfg, 1), cfg);
  CHECK(r.penalty_evaluations == 0);
  for (double p : r.report.penalty) CHECK(p == 0.0);
  CHECK(r.report.class_loss.size() == cfg.epochs);
  CHECK(r.report.total.size() == cfg.epochs);
}

TEST_CASE("train_detector is deterministic for a fixed seed") {
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.penalty_weight = 4.0;
  const Dataset ds = small_dataset(cfg, 2);
  const TrainResult a = train_detector(ds, cfg);
  const TrainResult b = train_detector(ds, cfg);
  CHECK(a.network == b.network);
  CHECK(a.report.total == b.report.total);
  CHECK(a.penalty_evaluations > 0);
  cfg.seed = 1;
  CHECK_FALSE(train_detector(ds, cfg).network == a.network);
}

TEST_CASE("train_on_features separates a linearly separable toy set") {
  Rng rng(3);
  const std::size_t n = 400;
  std::vector<int> labels(n);
  std::vector<double> table(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = int(i % 2);
    table[i] = (labels[i] ? 5.0 : -5.0) + 0.5 * rng.normal();
  }
  TrainConfig cfg;
  cfg.records = n;
  cfg.replicates = 1;
  cfg.penalty_weight = 0.0;
  cfg.epochs = 200;
  cfg.batch_size = 64;
  const TrainResult r = train_on_features(FeatureSet(1, 1, labels, table), cfg);
  CHECK(r.report.class_loss.back() < 0.1);
}

TEST_CASE("training loss is roughly non-increasing after epoch 5") {
  TrainConfig cfg = small_config();
  cfg.records = 2000;
  cfg.epochs = 20;
  const TrainResult r = train_detector(small_dataset(cfg, 4), cfg);
  for (std::size_t e = 5; e < r.report.class_loss.size(); ++e)
    CHECK(r.report.class_loss[e] <= 1.05 * r.report.class_loss[e - 1]);
  CHECK(r.report.class_loss.back() < r.report.class_loss.front());
}

TEST_CASE("train_detector argument errors") {
  TrainConfig cfg = small_config();
  const Dataset ds = small_dataset(cfg, 5);
  TrainConfig bad = cfg;
  bad.replicates = 3;
  CHECK_THROWS_AS(train_detector(ds, bad), std::invalid_argument);
  bad = cfg;
  bad.penalty_weight = -1;
  CHECK_THROWS_AS(train_detector(ds, bad), std::invalid_argument);

  TrainConfig single = cfg;
  single.replicates = 1;
  single.penalty_weight = 1.0;
  const Dataset ds1 = small_dataset(single, 6);
  CHECK_THROWS_AS(train_detector(ds1, single), std::invalid_argument);
  single.penalty_estimator = MmdEstimator::biased;
  single.epochs = 1;
  CHECK_NOTHROW(train_detector(ds1, single));
}

TEST_CASE("stratified penalty pairing") {
  TrainConfig cfg = small_config();
  cfg.penalty_weight = 4.0;
  cfg.epochs = 2;
  Rng rng(8);
  const FeatureSet bare = random_features(rng, 300, 300, cfg.replicates);
  cfg.records = bare.size();
  CHECK_THROWS_AS(train_on_features(bare, cfg), std::invalid_argument);

  cfg.penalty_pairing = TrainConfig::Pairing::random;
  CHECK_NOTHROW(train_on_features(bare, cfg));

  cfg.penalty_pairing = TrainConfig::Pairing::stratified;
  const Dataset ds = small_dataset(cfg, 9);
  const TrainResult a = train_detector(ds, cfg);
  const TrainResult b = train_detector(ds, cfg);
  CHECK(a.penalty_evaluations > 0);
  CHECK(a.network == b.network);
  for (double p : a.report.penalty) CHECK(p > 0.0);
}

TEST_CASE("train_detector reports a diverging loss") {
  TrainConfig cfg = small_config();
  cfg.records = 8;
  cfg.replicates = 1;
  cfg.batch_size = 4;
  std::vector<double> table(8 * kFeatureCount, 0.5);
  table[5 * kFeatureCount] = std::nan("");
  const FeatureSet fs(kFeatureCount, 1, {0, 1, 0, 1, 0, 1, 0, 1}, table);
  try {
    train_on_features(fs, cfg);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("train report csv") {
  TrainReport rep;
  rep.class_loss = {0.7, 0.5};
  rep.penalty = {0.1, 0.05};
  rep.total = {0.8, 0.55};
  const auto path = std::filesystem::temp_directory_path() / "cfarnet_test_report.csv";
  write_train_report_csv(rep, path);
  std::ifstream is(path);
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "epoch,class_loss,penalty,total");
  CHECK(first == "1,0.7,0.1,0.8");
  std::filesystem::remove(path);
}
