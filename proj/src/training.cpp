#include "cfarnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "cfarnet/csv.hpp"
#include "cfarnet/kernels.hpp"

namespace cfarnet {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kPairStream = 3;

// Scores and labels of one batch, laid out record by record.
struct BatchView {
  std::size_t replicates = 0;
  std::vector<double> rows;          // gathered feature rows
  std::vector<int> labels;           // per observation
  std::vector<std::size_t> null_records;  // positions within the batch
  std::vector<double> null_nuisance;      // parallel to null_records when known
};

BatchView gather(const FeatureSet& fs, std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
  BatchView view;
  view.replicates = fs.replicates();
  view.rows.reserve(batch.size() * fs.replicates() * fs.width());
  view.labels.reserve(batch.size() * fs.replicates());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::size_t rec = batch[k];
    if (rec >= fs.size()) throw std::out_of_range("batch index beyond feature set");
    const auto rows = fs.record_rows(rec);
    view.rows.insert(view.rows.end(), rows.begin(), rows.end());
    view.labels.insert(view.labels.end(), fs.replicates(), fs.label(rec));
    if (fs.label(rec) == 0) {
      view.null_records.push_back(k);
      if (fs.has_nuisance()) view.null_nuisance.push_back(fs.nuisance(rec));
    }
  }
  return view;
}

std::span<const double> group_scores(const BatchView& view, std::span<const double> scores,
                                     std::size_t null_index) {
  return scores.subspan(view.null_records[null_index] * view.replicates, view.replicates);
}

// Objective on precomputed scores; fills d(objective)/d(score) when upstream is non-empty.
LossTerms loss_from_scores(const BatchView& view, std::span<const double> scores,
                           double penalty_weight, const KernelConfig& kernel, MmdEstimator estimator,
                           std::span<const PenaltyPair> pairs, std::span<double> upstream) {
  LossTerms terms;
  const double inv_count = 1.0 / static_cast<double>(scores.size());
  double class_sum = 0.0;
  for (std::size_t r = 0; r < scores.size(); ++r) class_sum += bce_loss(scores[r], view.labels[r]);
  terms.classification = class_sum * inv_count;
  if (!upstream.empty())
    for (std::size_t r = 0; r < scores.size(); ++r)
      upstream[r] = bce_gradient(scores[r], view.labels[r]) * inv_count;

  if (penalty_weight != 0.0 && !pairs.empty()) {
    const std::size_t m = view.replicates;
    const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
    for (const PenaltyPair& p : pairs) {
      if (p.first >= view.null_records.size() || p.second >= view.null_records.size())
        throw std::out_of_range("penalty pair refers to a missing null record");
      const auto a = group_scores(view, scores, p.first);
      const auto b = group_scores(view, scores, p.second);
      terms.penalty += mmd(a, b, kernel, estimator) * inv_pairs;
      if (!upstream.empty())
        accumulate_mmd_gradient(a, b, kernel, penalty_weight * inv_pairs,
                                upstream.subspan(view.null_records[p.first] * m, m),
                                upstream.subspan(view.null_records[p.second] * m, m), estimator);
    }
  }
  terms.total = terms.classification + penalty_weight * terms.penalty;
  return terms;
}

std::vector<PenaltyPair> sample_pairs(std::size_t groups, std::size_t wanted, Rng& rng) {
  const std::size_t available = groups < 2 ? 0 : groups * (groups - 1) / 2;
  if (available <= wanted) return all_pairs(groups);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<PenaltyPair> out;
  out.reserve(wanted);
  while (out.size() < wanted) {
    std::size_t i = rng.index(groups), j = rng.index(groups);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    if (seen.emplace(i, j).second) out.push_back({i, j});
  }
  return out;
}

// Pairs one record of the lower nuisance half with one of the upper half.
std::vector<PenaltyPair> sample_stratified_pairs(const BatchView& view, std::size_t wanted, Rng& rng) {
  const std::size_t groups = view.null_records.size();
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return view.null_nuisance[a] < view.null_nuisance[b];
  });
  const std::size_t low = groups / 2, high = groups - low;
  std::vector<PenaltyPair> out;
  if (low == 0) return out;
  if (low * high <= wanted) {
    for (std::size_t i = 0; i < low; ++i)
      for (std::size_t j = 0; j < high; ++j) out.push_back({order[i], order[low + j]});
    return out;
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  out.reserve(wanted);
  while (out.size() < wanted) {
    const std::size_t i = rng.index(low), j = rng.index(high);
    if (seen.emplace(i, j).second) out.push_back({order[i], order[low + j]});
  }
  return out;
}

KernelConfig choose_bandwidth(const BandwidthPolicy& policy, const BatchView& view,
                              std::span<const double> scores) {
  if (policy.kind == BandwidthPolicy::Kind::fixed) return {policy.bandwidth};
  std::vector<double> pooled;
  for (std::size_t k = 0; k < view.null_records.size(); ++k) {
    const auto g = group_scores(view, scores, k);
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  if (pooled.size() < 2) return {1.0};
  if (pooled.size() > kBandwidthPoolCap) {
    std::vector<double> thinned(kBandwidthPoolCap);
    for (std::size_t k = 0; k < kBandwidthPoolCap; ++k)
      thinned[k] = pooled[k * pooled.size() / kBandwidthPoolCap];
    pooled = std::move(thinned);
  }
  return median_heuristic_bandwidth(pooled);
}

}  // namespace

void TrainConfig::validate() const {
  if (records == 0) throw std::invalid_argument("train.records must be positive");
  if (replicates == 0) throw std::invalid_argument("train.replicates must be positive");
  if (!(penalty_weight >= 0.0) || !std::isfinite(penalty_weight))
    throw std::invalid_argument("train.alpha must be non-negative");
  if (epochs == 0) throw std::invalid_argument("train.epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("train.learning_rate must be positive");
  if (penalty_pairs_per_batch == 0)
    throw std::invalid_argument("train.penalty_pairs_per_batch must be positive");
  for (std::size_t w : hidden_layers)
    if (w == 0) throw std::invalid_argument("train.hidden_layers entries must be positive");
}

FeatureSet::FeatureSet(std::size_t width, std::size_t replicates, std::vector<int> labels,
                       std::vector<double> table)
    : width_(width), replicates_(replicates), labels_(std::move(labels)), table_(std::move(table)) {
  if (width_ == 0 || replicates_ == 0) throw std::invalid_argument("FeatureSet: empty shape");
  if (table_.size() != labels_.size() * replicates_ * width_)
    throw std::invalid_argument("FeatureSet: table does not match records * replicates * width");
}

FeatureSet FeatureSet::from_dataset(const Dataset& dataset) {
  std::vector<double> table(dataset.size() * dataset.replicates() * kFeatureCount);
  kernels::omp::extract_features(dataset.samples(), dataset.dim(), table);
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const Record& r : dataset.records()) labels.push_back(r.label);
  FeatureSet fs(kFeatureCount, dataset.replicates(), std::move(labels), std::move(table));
  std::vector<double> sigma;
  sigma.reserve(dataset.size());
  for (const Record& r : dataset.records()) sigma.push_back(r.z.sigma);
  fs.set_nuisance(std::move(sigma));
  return fs;
}

void FeatureSet::set_nuisance(std::vector<double> values) {
  if (!values.empty() && values.size() != labels_.size())
    throw std::invalid_argument("FeatureSet: one nuisance value per record required");
  nuisance_ = std::move(values);
}

std::span<const double> FeatureSet::record_rows(std::size_t record) const {
  const std::size_t stride = replicates_ * width_;
  return std::span<const double>(table_).subspan(record * stride, stride);
}

double cfar_penalty(std::span<const std::vector<double>> groups, const KernelConfig& cfg,
                    MmdEstimator estimator) {
  for (const auto& g : groups)
    if (g.empty()) throw std::invalid_argument("cfar_penalty: every group needs at least one score");
  double sum = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) sum += mmd(groups[i], groups[j], cfg, estimator);
  return sum;
}

std::vector<PenaltyPair> all_pairs(std::size_t groups) {
  std::vector<PenaltyPair> out;
  for (std::size_t i = 0; i < groups; ++i)
    for (std::size_t j = i + 1; j < groups; ++j) out.push_back({i, j});
  return out;
}

LossTerms total_loss(const ScoringNetwork& net, const FeatureSet& features,
                     std::span<const std::size_t> batch, double penalty_weight,
                     const KernelConfig& kernel, MmdEstimator estimator) {
  const BatchView view = gather(features, batch);
  std::vector<double> scores(view.labels.size());
  kernels::omp::forward(net, view.rows, scores);
  const auto pairs = all_pairs(view.null_records.size());
  return loss_from_scores(view, scores, penalty_weight, kernel, estimator, pairs, {});
}

double total_loss(const ScoringNetwork& net, const Dataset& dataset,
                  std::span<const std::size_t> batch, double penalty_weight,
                  const KernelConfig& kernel, MmdEstimator estimator) {
  return total_loss(net, FeatureSet::from_dataset(dataset), batch, penalty_weight, kernel, estimator)
      .total;
}

LossTerms loss_and_gradient(const ScoringNetwork& net, const FeatureSet& features,
                            std::span<const std::size_t> batch, double penalty_weight,
                            const KernelConfig& kernel, std::span<const PenaltyPair> pairs,
                            std::span<double> grad, MmdEstimator estimator) {
  const BatchView view = gather(features, batch);
  std::vector<double> scores(view.labels.size());
  kernels::omp::ActivationCache cache;
  kernels::omp::forward(net, view.rows, scores, cache);
  std::vector<double> upstream(scores.size(), 0.0);
  const LossTerms terms =
      loss_from_scores(view, scores, penalty_weight, kernel, estimator, pairs, upstream);
  kernels::omp::accumulate_gradient(net, cache, upstream, grad);
  return terms;
}

AdamOptimizer::AdamOptimizer(std::size_t parameters, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(parameters, 0.0),
      v_(parameters, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("AdamOptimizer: size mismatch");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
}

TrainResult train_on_features(const FeatureSet& features, const TrainConfig& config,
                              const BandwidthPolicy& bandwidth) {
  config.validate();
  if (features.size() == 0) throw std::invalid_argument("train: empty training set");
  if (features.replicates() != config.replicates)
    throw std::invalid_argument("train: dataset replicates (M=" +
                                std::to_string(features.replicates()) +
                                ") do not match train.replicates (M=" +
                                std::to_string(config.replicates) + ")");
  if (bandwidth.kind == BandwidthPolicy::Kind::fixed) KernelConfig{bandwidth.bandwidth}.validate();
  if (config.penalty_weight > 0.0 && config.penalty_pairing == TrainConfig::Pairing::stratified &&
      !features.has_nuisance())
    throw std::invalid_argument("train: stratified penalty pairs need per-record nuisance values");
  if (config.penalty_weight > 0.0 && config.penalty_estimator == MmdEstimator::unbiased &&
      features.replicates() < 2)
    throw std::invalid_argument("train: the unbiased CFAR penalty needs at least 2 replicates per record");

  const Rng root(config.seed);
  std::vector<std::size_t> sizes{features.width()};
  sizes.insert(sizes.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  sizes.push_back(1);
  Rng init_rng = root.split(kInitStream);
  TrainResult result{ScoringNetwork::glorot(sizes, init_rng), {}, 0};
  ScoringNetwork& net = result.network;
  net.normalization() = FeatureNormalization::fit(features.table(), features.width());

  AdamOptimizer adam(net.parameter_count(), config.learning_rate);
  std::vector<double> grad(net.parameter_count());
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size = std::min(config.batch_size, features.size());
  const bool penalized = config.penalty_weight > 0.0;
  kernels::omp::ActivationCache cache;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.split(kShuffleStream).split(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    Rng pair_rng = root.split(kPairStream).split(epoch);
    const double alpha =
        epoch < config.penalty_warmup_epochs
            ? config.penalty_weight * static_cast<double>(epoch + 1) /
                  static_cast<double>(config.penalty_warmup_epochs + 1)
            : config.penalty_weight;

    double class_sum = 0.0, penalty_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batches) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const BatchView view = gather(features, batch);
      std::vector<double> scores(view.labels.size());
      kernels::omp::forward(net, view.rows, scores, cache);

      KernelConfig kernel;
      std::vector<PenaltyPair> pairs;
      if (penalized) {
        kernel = choose_bandwidth(bandwidth, view, scores);
        pairs = config.penalty_pairing == TrainConfig::Pairing::stratified
                    ? sample_stratified_pairs(view, config.penalty_pairs_per_batch, pair_rng)
                    : sample_pairs(view.null_records.size(), config.penalty_pairs_per_batch, pair_rng);
        ++result.penalty_evaluations;
      }
      std::vector<double> upstream(scores.size(), 0.0);
      const LossTerms terms =
          loss_from_scores(view, scores, alpha, kernel, config.penalty_estimator, pairs, upstream);
      if (!std::isfinite(terms.total))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(batches));
      std::fill(grad.begin(), grad.end(), 0.0);
      kernels::omp::accumulate_gradient(net, cache, upstream, grad);
      adam.step(net.parameters(), grad);

      class_sum += terms.classification;
      penalty_sum += terms.penalty;
    }
    const double cls = class_sum / static_cast<double>(batches);
    const double pen = penalty_sum / static_cast<double>(batches);
    result.report.class_loss.push_back(cls);
    result.report.penalty.push_back(pen);
    result.report.total.push_back(cls + alpha * pen);
  }
  result.report.final_total_loss = result.report.total.back();
  return result;
}

TrainResult train_detector(const Dataset& dataset, const TrainConfig& config,
                           const BandwidthPolicy& bandwidth) {
  return train_on_features(FeatureSet::from_dataset(dataset), config, bandwidth);
}

double fake_prior_threshold(const FakePrior& prior) {
  if (!(prior.p1 > 0.0 && prior.p1 < 1.0))
    throw std::invalid_argument("fake_prior_threshold: p1 must lie strictly between 0 and 1");
  return (1.0 - prior.p1) / prior.p1;
}

void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "epoch,class_loss,penalty,total\n";
  for (std::size_t e = 0; e < report.class_loss.size(); ++e)
    os << e + 1 << ',' << format_number(report.class_loss[e]) << ','
       << format_number(report.penalty[e]) << ',' << format_number(report.total[e]) << '\n';
}

}  // namespace cfarnet
