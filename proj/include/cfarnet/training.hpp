#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cfarnet/mmd.hpp"
#include "cfarnet/model.hpp"
#include "cfarnet/net.hpp"

namespace cfarnet {

struct TrainConfig {
  std::size_t records = 50000;
  std::size_t replicates = 10;
  /// Weight of the CFAR penalty (mean MMD over sampled null pairs); 0 trains a plain classifier.
  double penalty_weight = 32.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 256;  // in records
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t penalty_pairs_per_batch = 256;
  MmdEstimator penalty_estimator = MmdEstimator::unbiased;
  /// Which null-record pairs feed the penalty: uniformly random, or one record from the
  /// lower and one from the upper half of the batch's nuisance (sigma) values.
  enum class Pairing { random, stratified };
  Pairing penalty_pairing = Pairing::stratified;
  /// The penalty weight ramps linearly from 0 to penalty_weight over this many epochs.
  std::size_t penalty_warmup_epochs = 0;
  std::vector<std::size_t> hidden_layers{16, 16};

  void validate() const;
};

struct TrainReport {
  std::vector<double> class_loss;
  std::vector<double> penalty;  // unweighted
  std::vector<double> total;
  double final_total_loss = 0.0;
};

/// How the MMD bandwidth is chosen at each step.
struct BandwidthPolicy {
  enum class Kind { median_heuristic, fixed };
  Kind kind = Kind::median_heuristic;
  double bandwidth = 1.0;

  static BandwidthPolicy median_heuristic() { return {}; }
  static BandwidthPolicy fixed(double h) { return {Kind::fixed, h}; }
};

/// Pooled null scores beyond this count are subsampled at a fixed stride
/// before the median heuristic runs.
inline constexpr std::size_t kBandwidthPoolCap = 256;

/// Per-observation feature rows grouped by record: record i owns rows
/// [i*M, (i+1)*M) of a row-major table.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::size_t width, std::size_t replicates, std::vector<int> labels,
             std::vector<double> table);

  static FeatureSet from_dataset(const Dataset& dataset);

  std::size_t width() const { return width_; }
  std::size_t replicates() const { return replicates_; }
  std::size_t size() const { return labels_.size(); }
  int label(std::size_t record) const { return labels_[record]; }
  std::span<const double> record_rows(std::size_t record) const;
  std::span<const double> table() const { return table_; }

  /// Optional per-record nuisance value (the noise scale for generated data).
  void set_nuisance(std::vector<double> values);
  bool has_nuisance() const { return !nuisance_.empty(); }
  double nuisance(std::size_t record) const { return nuisance_[record]; }

 private:
  std::size_t width_ = 0;
  std::size_t replicates_ = 0;
  std::vector<int> labels_;
  std::vector<double> table_;
  std::vector<double> nuisance_;
};

/// Sum over unordered group pairs i < j of the MMD between group_i and group_j.
double cfar_penalty(std::span<const std::vector<double>> groups, const KernelConfig& cfg,
                    MmdEstimator estimator = MmdEstimator::biased);

struct LossTerms {
  double classification = 0.0;
  double penalty = 0.0;  // mean MMD over the pairs, unweighted
  double total = 0.0;
};

/// Indices into the batch's null records, in batch order.
struct PenaltyPair {
  std::size_t first = 0;
  std::size_t second = 0;
};

std::vector<PenaltyPair> all_pairs(std::size_t groups);

/// Mean cross-entropy over every observation of the batch plus penalty_weight times
/// the mean MMD over all pairs of the batch's null records. No null pairs, no penalty.
LossTerms total_loss(const ScoringNetwork& net, const FeatureSet& features,
                     std::span<const std::size_t> batch, double penalty_weight,
                     const KernelConfig& kernel, MmdEstimator estimator = MmdEstimator::biased);
double total_loss(const ScoringNetwork& net, const Dataset& dataset,
                  std::span<const std::size_t> batch, double penalty_weight,
                  const KernelConfig& kernel, MmdEstimator estimator = MmdEstimator::biased);

/// Objective restricted to the given null pairs; adds its parameter
/// gradient, bandwidth held fixed, into `grad`.
LossTerms loss_and_gradient(const ScoringNetwork& net, const FeatureSet& features,
                            std::span<const std::size_t> batch, double penalty_weight,
                            const KernelConfig& kernel, std::span<const PenaltyPair> pairs,
                            std::span<double> grad, MmdEstimator estimator = MmdEstimator::biased);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t parameters, double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  ScoringNetwork network;
  TrainReport report;
  /// Number of batches on which the penalty was evaluated.
  std::size_t penalty_evaluations = 0;
};

TrainResult train_on_features(const FeatureSet& features, const TrainConfig& config,
                              const BandwidthPolicy& bandwidth = BandwidthPolicy::median_heuristic());
TrainResult train_detector(const Dataset& dataset, const TrainConfig& config,
                           const BandwidthPolicy& bandwidth = BandwidthPolicy::median_heuristic());

/// Likelihood-ratio threshold the Bayes classifier converges to: (1 - p1) / p1.
double fake_prior_threshold(const FakePrior& prior);

/// CSV with columns epoch,class_loss,penalty,total.
void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace cfarnet
