#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfarnet/random.hpp"

namespace cfarnet {

/// Unknown deterministic parameter of the observation model: x = A*1 + sigma*n.
struct ParamVector {
  double amplitude = 0.0;
  double sigma = 1.0;
};

enum class NoiseFamily { gaussian, mixture };

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

/// I.i.d. per-entry noise law. The mixture draws each entry from
/// N(0, var_small) with probability 1 - epsilon and N(0, var_large) otherwise.
struct NoiseModel {
  NoiseFamily family = NoiseFamily::gaussian;
  double epsilon = 0.1;
  double var_small = 1.0;
  double var_large = 100.0;

  static NoiseModel gaussian() { return {}; }
  static NoiseModel mixture(double epsilon = 0.1, double var_small = 1.0, double var_large = 100.0) {
    return {NoiseFamily::mixture, epsilon, var_small, var_large};
  }

  double marginal_variance() const;
  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct Scenario {
  std::size_t dim = 16;
  NoiseModel noise;
  Interval amplitude_range{-1.0, 1.0};
  Interval sigma_range{0.5, 1.0};

  void validate() const;
};

/// Artificial prior used only to generate training data.
struct FakePrior {
  double p1 = 0.5;
  Interval amplitude_range{-1.0, 1.0};
  Interval sigma_range{0.5, 1.0};

  static FakePrior uniform_over(const Scenario& scenario, double p1 = 0.5);
  void validate() const;
};

struct Record {
  ParamVector z;
  int label = 0;
};

/// N records, each with M observations of length dim drawn at the record's z.
/// Observations are stored contiguously: record-major, then replicate.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t replicates, std::vector<Record> records,
          std::vector<double> samples);

  std::size_t dim() const { return dim_; }
  std::size_t replicates() const { return replicates_; }
  std::size_t size() const { return records_.size(); }

  const Record& record(std::size_t i) const { return records_[i]; }
  const std::vector<Record>& records() const { return records_; }

  std::span<const double> observation(std::size_t record, std::size_t replicate) const;
  /// All M observations of one record, back to back.
  std::span<const double> record_samples(std::size_t record) const;
  std::span<const double> samples() const { return samples_; }

  friend bool operator==(const Dataset&, const Dataset&);

 private:
  std::size_t dim_ = 0;
  std::size_t replicates_ = 0;
  std::vector<Record> records_;
  std::vector<double> samples_;
};

void sample_noise_into(const NoiseModel& noise, std::span<double> out, Rng& rng);
std::vector<double> sample_noise(const NoiseModel& noise, std::size_t n, Rng& rng);

void sample_observation_into(const Scenario& scenario, const ParamVector& z, std::span<double> out,
                             Rng& rng);
std::vector<double> sample_observation(const Scenario& scenario, const ParamVector& z, Rng& rng);

ParamVector sample_params(const FakePrior& prior, int label, Rng& rng);

/// Record i is drawn from `rng.split(i)`, so the result does not depend on
/// how the records are distributed over threads.
Dataset generate_dataset(const Scenario& scenario, const FakePrior& prior, std::size_t records,
                         std::size_t replicates, const Rng& rng);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cfarnet
