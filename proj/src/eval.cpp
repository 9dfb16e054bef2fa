#include "cfarnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cfarnet/csv.hpp"
#include "cfarnet/detectors.hpp"
#include "cfarnet/kernels.hpp"

namespace cfarnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_non_empty(std::span<const double> s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string(what) + ": scores must be non-empty");
}

std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

template <class DrawParams>
std::vector<double> sample_and_score(const BatchScorer& scorer, const Scenario& scenario,
                                     std::size_t count, const Rng& rng, DrawParams draw) {
  if (count == 0) throw std::invalid_argument("score_samples: count must be at least 1");
  scenario.validate();
  const std::size_t n = scenario.dim;
  std::vector<double> obs(count * n);
  const std::size_t blocks = (count + kSampleBlock - 1) / kSampleBlock;
#pragma omp parallel for schedule(static)
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
    Rng local = rng.split(static_cast<std::uint64_t>(blk));
    const std::size_t lo = blk * kSampleBlock, hi = std::min(count, lo + kSampleBlock);
    for (std::size_t r = lo; r < hi; ++r) {
      const ParamVector z = draw(local);
      sample_observation_into(scenario, z, std::span<double>(obs.data() + r * n, n), local);
    }
  }
  std::vector<double> scores(count);
  scorer(obs, n, scores);
  return scores;
}

}  // namespace

BatchScorer batch_scorer(Scorer scorer) {
  return [scorer = std::move(scorer)](std::span<const double> obs, std::size_t dim,
                                      std::span<double> scores) {
    const auto count = static_cast<std::int64_t>(scores.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < count; ++r) scores[r] = scorer(obs.subspan(r * dim, dim));
  };
}

BatchScorer glrt_scorer() { return batch_scorer(glrt_gaussian_score); }

BatchScorer network_scorer(ScoringNetwork net) {
  return [net = std::move(net)](std::span<const double> obs, std::size_t dim,
                                std::span<double> scores) {
    std::vector<double> features(scores.size() * kFeatureCount);
    kernels::omp::extract_features(obs.first(scores.size() * dim), dim, features);
    kernels::omp::forward(net, features, scores);
  };
}

std::vector<double> score_samples(const BatchScorer& scorer, const Scenario& scenario,
                                  const ParamVector& z, std::size_t count, const Rng& rng) {
  return sample_and_score(scorer, scenario, count, rng, [z](Rng&) { return z; });
}

std::vector<double> score_samples_alternative(const BatchScorer& scorer, const Scenario& scenario,
                                              double sigma, std::size_t count, const Rng& rng) {
  const Interval range = scenario.amplitude_range;
  return sample_and_score(scorer, scenario, count, rng, [range, sigma](Rng& local) {
    ParamVector z{0.0, sigma};
    do {
      z.amplitude = local.uniform(range.lo, range.hi);
    } while (z.amplitude == 0.0);
    return z;
  });
}

RateEstimate estimate_rate(std::span<const double> scores, double gamma) {
  require_non_empty(scores, "estimate_rate");
  std::size_t hits = 0;
  for (double s : scores) hits += s >= gamma ? 1 : 0;
  const double n = static_cast<double>(scores.size());
  const double rate = static_cast<double>(hits) / n;
  return {rate, std::sqrt(rate * (1.0 - rate) / n), scores.size()};
}

double mann_whitney_auc(std::span<const double> scores_h0, std::span<const double> scores_h1) {
  require_non_empty(scores_h0, "auc");
  require_non_empty(scores_h1, "auc");
  const auto h0 = sorted_copy(scores_h0);
  double wins = 0.0;
  for (double s : scores_h1) {
    const auto lo = std::lower_bound(h0.begin(), h0.end(), s);
    const auto hi = std::upper_bound(lo, h0.end(), s);
    wins += static_cast<double>(lo - h0.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(h0.size()) * static_cast<double>(scores_h1.size()));
}

RocCurve roc_curve(std::span<const double> scores_h0, std::span<const double> scores_h1) {
  require_non_empty(scores_h0, "roc_curve");
  require_non_empty(scores_h1, "roc_curve");
  const auto h0 = sorted_copy(scores_h0);
  const auto h1 = sorted_copy(scores_h1);
  std::vector<double> thresholds;
  thresholds.reserve(h0.size() + h1.size());
  std::merge(h0.begin(), h0.end(), h1.begin(), h1.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.reserve(thresholds.size() + 2);
  curve.points.push_back({kInf, 0.0, 0.0});
  const double n0 = static_cast<double>(h0.size()), n1 = static_cast<double>(h1.size());
  // Sweep thresholds downwards; counts of scores >= t grow monotonically.
  std::size_t i0 = h0.size(), i1 = h1.size();
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const double t = *it;
    while (i0 > 0 && h0[i0 - 1] >= t) --i0;
    while (i1 > 0 && h1[i1 - 1] >= t) --i1;
    curve.points.push_back({t, static_cast<double>(h0.size() - i0) / n0,
                            static_cast<double>(h1.size() - i1) / n1});
  }
  curve.points.push_back({-kInf, 1.0, 1.0});
  curve.auc = mann_whitney_auc(scores_h0, scores_h1);
  return curve;
}

RocCurve thin_curve(const RocCurve& curve, std::size_t max_points) {
  if (max_points < 2 || curve.points.size() <= max_points) return curve;
  RocCurve out;
  out.auc = curve.auc;
  const std::size_t last = curve.points.size() - 1;
  for (std::size_t k = 0; k < max_points; ++k) out.points.push_back(curve.points[k * last / (max_points - 1)]);
  return out;
}

double calibrate_threshold(std::span<const double> scores_h0, double target_fpr) {
  require_non_empty(scores_h0, "calibrate_threshold");
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw std::invalid_argument("calibrate_threshold: target_fpr must lie in (0, 1)");
  const auto sorted = sorted_copy(scores_h0);
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const double fraction = static_cast<double>(sorted.size() - i) / n;
    if (fraction <= target_fpr) return sorted[i];
  }
  return kInf;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, "ks_statistic");
  require_non_empty(b, "ks_statistic");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double best = 0.0;
  while (ia < sa.size() || ib < sb.size()) {
    double t;
    if (ia == sa.size()) t = sb[ib];
    else if (ib == sb.size()) t = sa[ia];
    else t = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= t) ++ia;
    while (ib < sb.size() && sb[ib] <= t) ++ib;
    best = std::max(best, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return best;
}

double cfar_deviation(const BatchScorer& scorer, const Scenario& scenario,
                      std::span<const ParamVector> z_list, std::size_t count, const Rng& rng,
                      StreamMode mode) {
  if (z_list.size() < 2) throw std::invalid_argument("cfar_deviation: need at least two null parameters");
  for (const ParamVector& z : z_list)
    if (z.amplitude != 0.0)
      throw std::invalid_argument("cfar_deviation: every parameter must lie in the null set (A = 0)");
  std::vector<std::vector<double>> samples;
  samples.reserve(z_list.size());
  for (std::size_t k = 0; k < z_list.size(); ++k) {
    const Rng stream = mode == StreamMode::common ? rng : rng.split(k);
    samples.push_back(score_samples(scorer, scenario, z_list[k], count, stream));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      worst = std::max(worst, ks_statistic(samples[i], samples[j]));
  return worst;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << header << '\n';
  return os;
}

}  // namespace

void write_roc_csv(std::span<const RocRow> rows, const std::filesystem::path& path) {
  auto os = open_csv(path, "detector,sigma,threshold,fpr,tpr");
  for (const RocRow& r : rows)
    os << r.detector << ',' << format_number(r.sigma) << ',' << format_number(r.point.threshold)
       << ',' << format_number(r.point.fpr) << ',' << format_number(r.point.tpr) << '\n';
}

void write_fpr_csv(std::span<const FprRow> rows, const std::filesystem::path& path) {
  auto os = open_csv(path, "detector,sigma,threshold,fpr,std_error");
  for (const FprRow& r : rows)
    os << r.detector << ',' << format_number(r.sigma) << ',' << format_number(r.threshold) << ','
       << format_number(r.fpr.rate) << ',' << format_number(r.fpr.std_error) << '\n';
}

void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  auto os = open_csv(path, "detector,scenario,auc_sigma_lo,auc_sigma_hi,cfar_deviation");
  for (const SummaryRow& r : rows)
    os << r.detector << ',' << r.scenario << ',' << format_number(r.auc_sigma_lo) << ','
       << format_number(r.auc_sigma_hi) << ',' << format_number(r.cfar_deviation) << '\n';
}

}  // namespace cfarnet
