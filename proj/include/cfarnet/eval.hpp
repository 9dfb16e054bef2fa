#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfarnet/model.hpp"
#include "cfarnet/net.hpp"
#include "cfarnet/random.hpp"

namespace cfarnet {

/// Scores `observations.size() / dim` observations laid out back to back.
using BatchScorer =
    std::function<void(std::span<const double> observations, std::size_t dim, std::span<double> scores)>;
using Scorer = std::function<double(std::span<const double>)>;

/// Lifts a per-observation statistic; the statistic must be safe to call concurrently.
BatchScorer batch_scorer(Scorer scorer);
BatchScorer glrt_scorer();
/// Holds its own copy of the network.
BatchScorer network_scorer(ScoringNetwork net);

/// Observations are generated in blocks of kSampleBlock, block b from rng.split(b).
inline constexpr std::size_t kSampleBlock = 4096;

std::vector<double> score_samples(const BatchScorer& scorer, const Scenario& scenario,
                                  const ParamVector& z, std::size_t count, const Rng& rng);
/// Scores under the alternative at fixed sigma with A drawn uniformly from the
/// scenario's amplitude range (zero redrawn) for every observation.
std::vector<double> score_samples_alternative(const BatchScorer& scorer, const Scenario& scenario,
                                              double sigma, std::size_t count, const Rng& rng);

struct RateEstimate {
  double rate = 0.0;
  double std_error = 0.0;
  std::size_t num_samples = 0;
};

/// Fraction of scores >= gamma with its binomial standard error.
RateEstimate estimate_rate(std::span<const double> scores, double gamma);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending, from +inf to -inf
  double auc = 0.0;
};

/// Mann-Whitney AUC with half credit for ties.
double mann_whitney_auc(std::span<const double> scores_h0, std::span<const double> scores_h1);
RocCurve roc_curve(std::span<const double> scores_h0, std::span<const double> scores_h1);
/// At most `max_points` points, evenly spaced in curve order, endpoints kept.
RocCurve thin_curve(const RocCurve& curve, std::size_t max_points);

/// Smallest observed score gamma with fraction(scores >= gamma) <= target_fpr,
/// or +inf when no observed score qualifies.
double calibrate_threshold(std::span<const double> scores_h0, double target_fpr);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

enum class StreamMode {
  common,       // every z reuses the same noise streams
  independent,  // z number k draws from rng.split(k)
};

/// Largest pairwise KS distance between the null score distributions at the given z values.
double cfar_deviation(const BatchScorer& scorer, const Scenario& scenario,
                      std::span<const ParamVector> z_list, std::size_t count, const Rng& rng,
                      StreamMode mode = StreamMode::common);

struct RocRow {
  std::string detector;
  double sigma = 0.0;
  RocPoint point;
};

struct FprRow {
  std::string detector;
  double sigma = 0.0;
  double threshold = 0.0;
  RateEstimate fpr;
};

struct SummaryRow {
  std::string detector;
  std::string scenario;
  double auc_sigma_lo = 0.0;
  double auc_sigma_hi = 0.0;
  double cfar_deviation = 0.0;
};

void write_roc_csv(std::span<const RocRow> rows, const std::filesystem::path& path);
void write_fpr_csv(std::span<const FprRow> rows, const std::filesystem::path& path);
void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path);

}  // namespace cfarnet
