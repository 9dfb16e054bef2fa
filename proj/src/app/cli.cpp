#include "cfarnet/app/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "cfarnet/app/config.hpp"
#include "cfarnet/app/experiment.hpp"
#include "cfarnet/kernels.hpp"

namespace cfarnet::app {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quick = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "override train.seed");
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config output)");
  cmd->add_flag("--quick", opts.quick, "desk-scale run: N=2000, 10^4 Monte Carlo samples");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? parse_config("{}") : load_config(opts.config_path);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  if (opts.quick) apply_quick(cfg);
  validate(cfg);
  return cfg;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Timestamps live only here so every other artifact is byte-reproducible.
void write_metadata(const ExperimentConfig& cfg, const std::string& command, const std::string& started,
                    const std::string& status) {
  std::ofstream os(cfg.output_dir / "run_metadata.json");
  os << "{\n  \"command\": \"" << command << "\",\n  \"started\": \"" << started
     << "\",\n  \"finished\": \"" << utc_now() << "\",\n  \"status\": \"" << status
     << "\",\n  \"threads\": " << kernels::thread_limit() << ",\n  \"config\": " << to_json(cfg)
     << "\n}\n";
}

void apply_thread_env() {
  if (const char* env = std::getenv("CFARNET_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) kernels::set_thread_limit(n);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned CFAR detectors: data generation, training and Monte Carlo evaluation"};
  app.require_subcommand(1);

  CommonOptions generate_opts, train_opts, eval_opts, fig_opts;
  auto* generate = app.add_subcommand("generate", "generate the synthetic training dataset");
  auto* train = app.add_subcommand("train", "train NET and CFAR-NET on the generated dataset");
  auto* eval = app.add_subcommand("eval", "evaluate GLRT, NET and CFAR-NET; write CSVs and plots");
  auto* fig = app.add_subcommand("reproduce-fig1",
                                 "full pipeline for Gaussian and mixture noise (12 panels + CSVs)");
  add_common(generate, generate_opts);
  add_common(train, train_opts);
  add_common(eval, eval_opts);
  add_common(fig, fig_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const CommonOptions& opts = chosen == generate ? generate_opts
                              : chosen == train  ? train_opts
                              : chosen == eval   ? eval_opts
                                                 : fig_opts;
  ExperimentConfig cfg;
  try {
    cfg = resolve(opts);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kValidationError;
  }

  apply_thread_env();
  const std::string started = utc_now();
  const std::string command = chosen->get_name();
  try {
    fs::create_directories(cfg.output_dir);
    DirectoryLock lock(cfg.output_dir);
    fs::remove(cfg.output_dir / "FAILED");
    try {
      if (chosen == generate) {
        run_generate(cfg, out);
      } else if (chosen == train) {
        run_train(cfg, out);
      } else if (chosen == eval) {
        print_summary(run_eval(cfg, out), out);
      } else {
        print_summary(run_reproduce(cfg, out), out);
      }
    } catch (const std::exception& e) {
      std::ofstream(cfg.output_dir / "FAILED") << command << ": " << e.what() << '\n';
      write_metadata(cfg, command, started, "failed");
      throw;
    }
    write_metadata(cfg, command, started, "ok");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kSuccess;
}

}  // namespace cfarnet::app
