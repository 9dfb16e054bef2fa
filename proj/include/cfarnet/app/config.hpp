#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfarnet/model.hpp"
#include "cfarnet/training.hpp"

namespace cfarnet::app {

/// Rejected configuration; `key()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct EvalConfig {
  std::size_t mc_samples = 100000;
  std::vector<double> sigma_grid{0.5, 1.0};
  std::vector<double> amplitude_grid{0.25, 0.5, 1.0};
  std::vector<double> target_fpr{0.1, 0.01};
  std::size_t curve_points = 200;  // rows per ROC curve in roc.csv
};

struct ExperimentConfig {
  Scenario scenario;
  double p1 = 0.5;
  TrainConfig train;
  BandwidthPolicy bandwidth;
  EvalConfig eval;
  std::filesystem::path output_dir = "cfarnet_out";

  FakePrior prior() const { return FakePrior::uniform_over(scenario, p1); }
};

/// Strict parse of a JSON document: unknown keys and out-of-range values
/// raise ConfigError. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Desk-scale settings: N = 2000 training records and 10^4 Monte Carlo samples.
void apply_quick(ExperimentConfig& config);

void validate(const ExperimentConfig& config);

/// Canonical JSON rendering of a config, every field explicit.
std::string to_json(const ExperimentConfig& config);

}  // namespace cfarnet::app
