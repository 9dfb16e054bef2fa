#include "cfarnet/app/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "cfarnet/app/svg.hpp"
#include "cfarnet/csv.hpp"
#include "cfarnet/detectors.hpp"
#include "cfarnet/training.hpp"

namespace cfarnet::app {

namespace fs = std::filesystem;

namespace {

// Independent random streams derived from the experiment seed.
constexpr std::uint64_t kDataStream = 11;
constexpr std::uint64_t kNetStream = 12;
constexpr std::uint64_t kCfarNetStream = 13;
constexpr std::uint64_t kEvalStream = 14;

constexpr std::size_t kFprThresholds = 60;

std::string sigma_tag(double sigma) { return format_number(sigma); }

fs::path ensure_dir(const ExperimentConfig& config) {
  const fs::path dir = scenario_dir(config);
  fs::create_directories(dir);
  return dir;
}

Dataset obtain_dataset(const ExperimentConfig& config, std::ostream& log) {
  const fs::path path = scenario_dir(config) / "dataset.bin";
  if (fs::exists(path)) {
    Dataset ds = load_dataset(path);
    if (ds.size() == config.train.records && ds.replicates() == config.train.replicates &&
        ds.dim() == config.scenario.dim)
      return ds;
    log << "dataset.bin does not match the config; regenerating\n";
  }
  run_generate(config, log);
  return load_dataset(path);
}

struct Detector {
  std::string name;
  BatchScorer scorer;
};

std::vector<Detector> load_detectors(const ExperimentConfig& config) {
  const fs::path dir = scenario_dir(config);
  for (const char* file : {"net.bin", "cfarnet.bin"})
    if (!fs::exists(dir / file))
      throw std::runtime_error("missing " + (dir / file).string() + "; run the train stage first");
  return {{"glrt", glrt_scorer()},
          {"net", network_scorer(load_network(dir / "net.bin"))},
          {"cfarnet", network_scorer(load_network(dir / "cfarnet.bin"))}};
}

double max_pairwise_ks(const std::vector<std::vector<double>>& samples) {
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      worst = std::max(worst, ks_statistic(samples[i], samples[j]));
  return worst;
}

std::vector<double> pooled(const std::vector<std::vector<double>>& samples) {
  std::vector<double> out;
  for (const auto& s : samples) out.insert(out.end(), s.begin(), s.end());
  return out;
}

// Thresholds at evenly spaced quantiles of a sample.
std::vector<double> quantile_grid(std::vector<double> values, std::size_t count) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = k * (values.size() - 1) / (count - 1);
    if (out.empty() || values[idx] != out.back()) out.push_back(values[idx]);
  }
  return out;
}

}  // namespace

fs::path scenario_dir(const ExperimentConfig& config) {
  return config.output_dir / to_string(config.scenario.noise.family);
}

void run_generate(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = ensure_dir(config);
  const Rng root(config.train.seed);
  log << "[" << to_string(config.scenario.noise.family) << "] generating N=" << config.train.records
      << " M=" << config.train.replicates << " n=" << config.scenario.dim << '\n';
  const Dataset ds = generate_dataset(config.scenario, config.prior(), config.train.records,
                                      config.train.replicates, root.split(kDataStream));
  save_dataset(ds, dir / "dataset.bin");
}

void run_train(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = ensure_dir(config);
  const Dataset ds = obtain_dataset(config, log);
  const FeatureSet features = FeatureSet::from_dataset(ds);
  const Rng root(config.train.seed);

  struct Job {
    const char* name;
    double alpha;
    std::uint64_t stream;
  };
  for (const Job& job : {Job{"net", 0.0, kNetStream},
                         Job{"cfarnet", config.train.penalty_weight, kCfarNetStream}}) {
    TrainConfig tc = config.train;
    tc.penalty_weight = job.alpha;
    tc.seed = mix_seed(root.seed(), job.stream);
    log << "[" << to_string(config.scenario.noise.family) << "] training " << job.name
        << " (alpha=" << format_number(job.alpha) << ", epochs=" << tc.epochs << ")\n";
    const TrainResult result = train_on_features(features, tc, config.bandwidth);
    save_network(result.network, dir / (std::string(job.name) + ".bin"));
    write_train_report_csv(result.report, dir / ("train_report_" + std::string(job.name) + ".csv"));
    log << "  final loss " << format_number(result.report.final_total_loss) << '\n';
  }
}

std::vector<SummaryRow> run_eval(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = ensure_dir(config);
  const auto detectors = load_detectors(config);
  const auto& ev = config.eval;
  const Scenario& scenario = config.scenario;
  const Rng eval_root = Rng(config.train.seed).split(kEvalStream);
  const std::string scenario_name = to_string(scenario.noise.family);
  const std::size_t sigmas = ev.sigma_grid.size();
  const std::size_t lo_idx = std::min_element(ev.sigma_grid.begin(), ev.sigma_grid.end()) - ev.sigma_grid.begin();
  const std::size_t hi_idx = std::max_element(ev.sigma_grid.begin(), ev.sigma_grid.end()) - ev.sigma_grid.begin();

  std::vector<RocRow> roc_rows;
  std::vector<FprRow> fpr_rows;
  std::vector<SummaryRow> summary;
  std::ofstream calib(dir / "calibration.csv");
  calib << "detector,target_fpr,threshold,sigma,fpr,std_error\n";
  std::ofstream tpr_csv(dir / "tpr_vs_amplitude.csv");
  tpr_csv << "detector,sigma,amplitude,target_fpr,threshold,tpr,std_error\n";

  std::vector<std::vector<Series>> roc_series(sigmas);
  std::vector<Series> tpr_series;

  for (const Detector& det : detectors) {
    log << "[" << scenario_name << "] evaluating " << det.name << '\n';
    // Every detector sees the same noise draws (common random numbers).
    std::vector<std::vector<double>> h0(sigmas), h1(sigmas);
    std::vector<double> aucs(sigmas);
    for (std::size_t s = 0; s < sigmas; ++s) {
      const double sigma = ev.sigma_grid[s];
      const Rng stream = eval_root.split(s);
      h0[s] = score_samples(det.scorer, scenario, {0.0, sigma}, ev.mc_samples, stream.split(0));
      h1[s] = score_samples_alternative(det.scorer, scenario, sigma, ev.mc_samples, stream.split(1));
      const RocCurve curve = thin_curve(roc_curve(h0[s], h1[s]), ev.curve_points);
      aucs[s] = curve.auc;
      Series series{det.name, {}};
      for (const RocPoint& p : curve.points) {
        roc_rows.push_back({det.name, sigma, p});
        series.points.emplace_back(p.fpr, p.tpr);
      }
      roc_series[s].push_back(std::move(series));
    }

    const std::vector<double> pool = pooled(h0);
    std::vector<Series> fpr_series;
    const auto thresholds = quantile_grid(pool, kFprThresholds);
    for (std::size_t s = 0; s < sigmas; ++s) {
      Series series{"sigma=" + sigma_tag(ev.sigma_grid[s]), {}};
      for (double t : thresholds) {
        const RateEstimate r = estimate_rate(h0[s], t);
        fpr_rows.push_back({det.name, ev.sigma_grid[s], t, r});
        series.points.emplace_back(t, r.rate);
      }
      fpr_series.push_back(std::move(series));
    }
    emit_svg_plot(fpr_series,
                  {det.name + " false alarm rate vs threshold (" + scenario_name + ")", "threshold",
                   "FPR", false, true},
                  dir / ("fpr_vs_threshold_" + det.name + ".svg"));

    for (double target : ev.target_fpr) {
      const double gamma = calibrate_threshold(pool, target);
      for (std::size_t s = 0; s < sigmas; ++s) {
        const RateEstimate r = estimate_rate(h0[s], gamma);
        calib << det.name << ',' << format_number(target) << ',' << format_number(gamma) << ','
              << format_number(ev.sigma_grid[s]) << ',' << format_number(r.rate) << ','
              << format_number(r.std_error) << '\n';
      }
    }

    const double target = ev.target_fpr.front();
    const double gamma = calibrate_threshold(pool, target);
    for (std::size_t s = 0; s < sigmas; ++s) {
      const double sigma = ev.sigma_grid[s];
      Series series{det.name + " sigma=" + sigma_tag(sigma), {}};
      for (std::size_t a = 0; a < ev.amplitude_grid.size(); ++a) {
        const double amp = ev.amplitude_grid[a];
        const auto scores = score_samples(det.scorer, scenario, {amp, sigma}, ev.mc_samples,
                                          eval_root.split(s).split(2 + a));
        const RateEstimate r = estimate_rate(scores, gamma);
        tpr_csv << det.name << ',' << format_number(sigma) << ',' << format_number(amp) << ','
                << format_number(target) << ',' << format_number(gamma) << ','
                << format_number(r.rate) << ',' << format_number(r.std_error) << '\n';
        series.points.emplace_back(amp, r.rate);
      }
      tpr_series.push_back(std::move(series));
    }

    summary.push_back({det.name, scenario_name, aucs[lo_idx], aucs[hi_idx], max_pairwise_ks(h0)});
  }

  for (std::size_t s = 0; s < sigmas; ++s)
    emit_svg_plot(roc_series[s],
                  {"ROC, sigma=" + sigma_tag(ev.sigma_grid[s]) + " (" + scenario_name + ")", "FPR",
                   "TPR", true, false},
                  dir / ("roc_sigma_" + sigma_tag(ev.sigma_grid[s]) + ".svg"));
  emit_svg_plot(tpr_series,
                {"TPR at pooled FPR " + format_number(ev.target_fpr.front()) + " (" + scenario_name + ")",
                 "amplitude A", "TPR", false, false},
                dir / "tpr_vs_amplitude.svg");

  write_roc_csv(roc_rows, dir / "roc.csv");
  write_fpr_csv(fpr_rows, dir / "fpr_vs_threshold.csv");
  write_summary_csv(summary, dir / "summary.csv");
  return summary;
}

std::vector<SummaryRow> run_reproduce(const ExperimentConfig& config, std::ostream& log) {
  std::vector<SummaryRow> all;
  for (NoiseFamily family : {NoiseFamily::gaussian, NoiseFamily::mixture}) {
    ExperimentConfig c = config;
    c.scenario.noise.family = family;
    run_generate(c, log);
    run_train(c, log);
    const auto rows = run_eval(c, log);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  write_summary_csv(all, config.output_dir / "summary.csv");
  return all;
}

void print_summary(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << std::left << std::setw(10) << "detector" << std::setw(10) << "scenario" << std::right
     << std::setw(14) << "auc_sigma_lo" << std::setw(14) << "auc_sigma_hi" << std::setw(16)
     << "cfar_deviation" << '\n';
  for (const SummaryRow& r : rows)
    os << std::left << std::setw(10) << r.detector << std::setw(10) << r.scenario << std::right
       << std::fixed << std::setprecision(4) << std::setw(14) << r.auc_sigma_lo << std::setw(14)
       << r.auc_sigma_hi << std::setw(16) << r.cfar_deviation << '\n';
  os.unsetf(std::ios::floatfield);
}

DirectoryLock::DirectoryLock(fs::path dir) : path_(std::move(dir) / ".lock") {
  fs::create_directories(path_.parent_path());
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr)
    throw std::runtime_error("experiment directory is locked by another run (remove " +
                             path_.string() + " if stale)");
  std::fclose(f);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace cfarnet::app
