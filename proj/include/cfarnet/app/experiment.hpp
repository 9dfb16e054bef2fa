#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfarnet/app/config.hpp"
#include "cfarnet/eval.hpp"

namespace cfarnet::app {

/// Names of the three compared detectors, in report order.
inline const std::vector<std::string> kDetectorNames{"glrt", "net", "cfarnet"};

/// Directory holding one noise model's artifacts: <output>/<noise>.
std::filesystem::path scenario_dir(const ExperimentConfig& config);

/// Writes dataset.bin.
void run_generate(const ExperimentConfig& config, std::ostream& log);
/// Trains NET (alpha = 0) and CFAR-NET (alpha = train.alpha) on dataset.bin,
/// generating it first when missing; writes net.bin, cfarnet.bin and the
/// training-report CSVs.
void run_train(const ExperimentConfig& config, std::ostream& log);
/// Evaluates the three detectors and writes CSVs plus six SVG panels.
std::vector<SummaryRow> run_eval(const ExperimentConfig& config, std::ostream& log);
/// generate + train + eval for Gaussian and mixture noise; writes a combined summary.csv.
std::vector<SummaryRow> run_reproduce(const ExperimentConfig& config, std::ostream& log);

void print_summary(const std::vector<SummaryRow>& rows, std::ostream& os);

/// Exclusive ownership of an experiment directory via <dir>/.lock.
class DirectoryLock {
 public:
  explicit DirectoryLock(std::filesystem::path dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace cfarnet::app
