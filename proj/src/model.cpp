#include "cfarnet/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cfarnet/binary_io.hpp"

namespace cfarnet {

namespace {

constexpr char kDatasetMagic[] = "CFARDATA";
constexpr std::uint32_t kDatasetVersion = 1;

void check_interval(const Interval& iv, const char* what) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
    throw std::invalid_argument(std::string(what) + ": interval must be finite with lo <= hi");
}

}  // namespace

std::string to_string(NoiseFamily family) {
  return family == NoiseFamily::gaussian ? "gaussian" : "mixture";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "mixture") return NoiseFamily::mixture;
  throw std::invalid_argument("unknown noise family '" + name + "' (expected gaussian or mixture)");
}

double NoiseModel::marginal_variance() const {
  if (family == NoiseFamily::gaussian) return 1.0;
  return (1.0 - epsilon) * var_small + epsilon * var_large;
}

void NoiseModel::validate() const {
  if (family == NoiseFamily::gaussian) return;
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("mixture epsilon must lie in [0, 1]");
  if (!(var_small > 0.0) || !(var_large > 0.0) || !std::isfinite(var_small) ||
      !std::isfinite(var_large))
    throw std::invalid_argument("mixture variances must be positive and finite");
}

void Scenario::validate() const {
  if (dim < 2) throw std::invalid_argument("scenario dim must be at least 2");
  noise.validate();
  check_interval(amplitude_range, "amplitude_range");
  check_interval(sigma_range, "sigma_range");
  if (!(sigma_range.lo > 0.0)) throw std::invalid_argument("sigma_range must be strictly positive");
}

FakePrior FakePrior::uniform_over(const Scenario& scenario, double p1) {
  return {p1, scenario.amplitude_range, scenario.sigma_range};
}

void FakePrior::validate() const {
  if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("fake prior p1 must lie in (0, 1)");
  check_interval(amplitude_range, "amplitude_range");
  check_interval(sigma_range, "sigma_range");
  if (!(sigma_range.lo > 0.0)) throw std::invalid_argument("sigma_range must be strictly positive");
  if (amplitude_range.lo == 0.0 && amplitude_range.hi == 0.0)
    throw std::invalid_argument("amplitude_range must contain nonzero values");
}

Dataset::Dataset(std::size_t dim, std::size_t replicates, std::vector<Record> records,
                 std::vector<double> samples)
    : dim_(dim), replicates_(replicates), records_(std::move(records)), samples_(std::move(samples)) {
  if (samples_.size() != records_.size() * replicates_ * dim_)
    throw std::invalid_argument("Dataset: sample buffer does not match N * M * dim");
}

std::span<const double> Dataset::observation(std::size_t record, std::size_t replicate) const {
  return std::span<const double>(samples_).subspan((record * replicates_ + replicate) * dim_, dim_);
}

std::span<const double> Dataset::record_samples(std::size_t record) const {
  return std::span<const double>(samples_).subspan(record * replicates_ * dim_, replicates_ * dim_);
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.dim_ != b.dim_ || a.replicates_ != b.replicates_ || a.records_.size() != b.records_.size())
    return false;
  for (std::size_t i = 0; i < a.records_.size(); ++i) {
    const auto& ra = a.records_[i];
    const auto& rb = b.records_[i];
    if (ra.label != rb.label || ra.z.amplitude != rb.z.amplitude || ra.z.sigma != rb.z.sigma)
      return false;
  }
  return a.samples_ == b.samples_;
}

void sample_noise_into(const NoiseModel& noise, std::span<double> out, Rng& rng) {
  if (out.empty()) throw std::invalid_argument("sample_noise: n must be at least 1");
  if (noise.family == NoiseFamily::gaussian) {
    for (double& v : out) v = rng.normal();
    return;
  }
  const double sd_small = std::sqrt(noise.var_small);
  const double sd_large = std::sqrt(noise.var_large);
  for (double& v : out) {
    const bool large = rng.bernoulli(noise.epsilon);
    v = (large ? sd_large : sd_small) * rng.normal();
  }
}

std::vector<double> sample_noise(const NoiseModel& noise, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  sample_noise_into(noise, out, rng);
  return out;
}

void sample_observation_into(const Scenario& scenario, const ParamVector& z, std::span<double> out,
                             Rng& rng) {
  if (!(z.sigma > 0.0)) throw std::invalid_argument("sample_observation: sigma must be positive");
  sample_noise_into(scenario.noise, out, rng);
  for (double& v : out) v = z.amplitude + z.sigma * v;
}

std::vector<double> sample_observation(const Scenario& scenario, const ParamVector& z, Rng& rng) {
  std::vector<double> out(scenario.dim);
  sample_observation_into(scenario, z, out, rng);
  return out;
}

ParamVector sample_params(const FakePrior& prior, int label, Rng& rng) {
  if (label != 0 && label != 1) throw std::invalid_argument("sample_params: label must be 0 or 1");
  ParamVector z;
  if (label == 1) {
    do {
      z.amplitude = rng.uniform(prior.amplitude_range.lo, prior.amplitude_range.hi);
    } while (z.amplitude == 0.0);
  }
  z.sigma = rng.uniform(prior.sigma_range.lo, prior.sigma_range.hi);
  return z;
}

Dataset generate_dataset(const Scenario& scenario, const FakePrior& prior, std::size_t records,
                         std::size_t replicates, const Rng& rng) {
  if (records == 0 || replicates == 0)
    throw std::invalid_argument("generate_dataset: N and M must be at least 1");
  scenario.validate();
  prior.validate();

  const std::size_t n = scenario.dim;
  std::vector<Record> recs(records);
  std::vector<double> samples(records * replicates * n);

  const auto count = static_cast<std::int64_t>(records);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    Rng local = rng.split(static_cast<std::uint64_t>(i));
    Record& r = recs[i];
    r.label = local.bernoulli(prior.p1) ? 1 : 0;
    r.z = sample_params(prior, r.label, local);
    for (std::size_t j = 0; j < replicates; ++j) {
      std::span<double> out(samples.data() + (i * replicates + j) * n, n);
      sample_observation_into(scenario, r.z, out, local);
    }
  }
  return Dataset(n, replicates, std::move(recs), std::move(samples));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kDatasetMagic, 8);
  binary::write_u32(os, kDatasetVersion);
  binary::write_u64(os, dataset.dim());
  binary::write_u64(os, dataset.replicates());
  binary::write_u64(os, dataset.size());
  for (const Record& r : dataset.records()) {
    binary::write_u32(os, static_cast<std::uint32_t>(r.label));
    binary::write_f64(os, r.z.amplitude);
    binary::write_f64(os, r.z.sigma);
  }
  for (double v : dataset.samples()) binary::write_f64(os, v);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  binary::expect_magic(is, std::string(kDatasetMagic, 8));
  if (binary::read_u32(is) != kDatasetVersion)
    throw std::runtime_error("unsupported dataset version in " + path.string());
  const std::uint64_t dim = binary::read_u64(is);
  const std::uint64_t reps = binary::read_u64(is);
  const std::uint64_t count = binary::read_u64(is);
  std::vector<Record> records(count);
  for (Record& r : records) {
    r.label = static_cast<int>(binary::read_u32(is));
    r.z.amplitude = binary::read_f64(is);
    r.z.sigma = binary::read_f64(is);
  }
  std::vector<double> samples(count * reps * dim);
  for (double& v : samples) v = binary::read_f64(is);
  return Dataset(dim, reps, std::move(records), std::move(samples));
}

}  // namespace cfarnet
