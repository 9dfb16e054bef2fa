#include "cfarnet/app/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cfarnet::app {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key, std::string("wrong type (") + e.what() + ")");
  }
}

void read(const json& obj, const std::string& path, const char* key, std::size_t& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) throw ConfigError(path + "." + key, "expected a non-negative integer");
  out = it->get<std::size_t>();
}

void read(const json& obj, const std::string& path, const char* key, std::vector<std::size_t>& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array()) throw ConfigError(path + "." + key, "expected an array of non-negative integers");
  out.clear();
  for (const json& v : *it) {
    if (!v.is_number_unsigned())
      throw ConfigError(path + "." + key, "expected an array of non-negative integers");
    out.push_back(v.get<std::size_t>());
  }
}

void read_interval(const json& obj, const std::string& path, const char* key, Interval& out) {
  std::vector<double> pair;
  read(obj, path, key, pair);
  if (obj.contains(key)) {
    if (pair.size() != 2) throw ConfigError(path + "." + key, "expected [lo, hi]");
    out = {pair[0], pair[1]};
  }
}

void check(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  reject_unknown(doc, "", {"scenario", "train", "eval", "output"});

  if (doc.contains("scenario")) {
    const json& s = doc["scenario"];
    reject_unknown(s, "scenario", {"noise", "dim", "epsilon", "var_small", "var_large",
                                   "amplitude_range", "sigma_range"});
    std::string noise = to_string(cfg.scenario.noise.family);
    read(s, "scenario", "noise", noise);
    try {
      cfg.scenario.noise.family = noise_family_from_string(noise);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scenario.noise", e.what());
    }
    read(s, "scenario", "dim", cfg.scenario.dim);
    read(s, "scenario", "epsilon", cfg.scenario.noise.epsilon);
    read(s, "scenario", "var_small", cfg.scenario.noise.var_small);
    read(s, "scenario", "var_large", cfg.scenario.noise.var_large);
    read_interval(s, "scenario", "amplitude_range", cfg.scenario.amplitude_range);
    read_interval(s, "scenario", "sigma_range", cfg.scenario.sigma_range);
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t, "train", {"records", "replicates", "alpha", "epochs", "batch_size",
                                "learning_rate", "seed", "penalty_pairs_per_batch",
                                "hidden_layers", "p1", "bandwidth", "penalty_estimator",
                                "penalty_pairing", "penalty_warmup_epochs"});
    read(t, "train", "records", cfg.train.records);
    read(t, "train", "replicates", cfg.train.replicates);
    read(t, "train", "alpha", cfg.train.penalty_weight);
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "learning_rate", cfg.train.learning_rate);
    read(t, "train", "seed", cfg.train.seed);
    read(t, "train", "penalty_pairs_per_batch", cfg.train.penalty_pairs_per_batch);
    read(t, "train", "hidden_layers", cfg.train.hidden_layers);
    read(t, "train", "penalty_warmup_epochs", cfg.train.penalty_warmup_epochs);
    read(t, "train", "p1", cfg.p1);
    if (t.contains("bandwidth")) {
      const json& bw = t["bandwidth"];
      if (bw.is_string() && bw.get<std::string>() == "median")
        cfg.bandwidth = BandwidthPolicy::median_heuristic();
      else if (bw.is_number())
        cfg.bandwidth = BandwidthPolicy::fixed(bw.get<double>());
      else
        throw ConfigError("train.bandwidth", "expected \"median\" or a positive number");
    }
    if (t.contains("penalty_estimator")) {
      const json& est = t["penalty_estimator"];
      const std::string name = est.is_string() ? est.get<std::string>() : "";
      if (name == "unbiased")
        cfg.train.penalty_estimator = MmdEstimator::unbiased;
      else if (name == "biased")
        cfg.train.penalty_estimator = MmdEstimator::biased;
      else
        throw ConfigError("train.penalty_estimator", "expected \"unbiased\" or \"biased\"");
    }
    if (t.contains("penalty_pairing")) {
      const json& pairing = t["penalty_pairing"];
      const std::string name = pairing.is_string() ? pairing.get<std::string>() : "";
      if (name == "stratified")
        cfg.train.penalty_pairing = TrainConfig::Pairing::stratified;
      else if (name == "random")
        cfg.train.penalty_pairing = TrainConfig::Pairing::random;
      else
        throw ConfigError("train.penalty_pairing", "expected \"stratified\" or \"random\"");
    }
  }

  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    reject_unknown(e, "eval", {"mc_samples", "sigma_grid", "amplitude_grid", "target_fpr",
                               "curve_points"});
    read(e, "eval", "mc_samples", cfg.eval.mc_samples);
    read(e, "eval", "sigma_grid", cfg.eval.sigma_grid);
    read(e, "eval", "amplitude_grid", cfg.eval.amplitude_grid);
    read(e, "eval", "target_fpr", cfg.eval.target_fpr);
    read(e, "eval", "curve_points", cfg.eval.curve_points);
  }

  if (doc.contains("output")) {
    std::string out;
    read(doc, "", "output", out);
    cfg.output_dir = out;
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void apply_quick(ExperimentConfig& config) {
  config.train.records = 2000;
  config.eval.mc_samples = 10000;
}

void validate(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  check(s.dim >= 2, "scenario.dim", "must be at least 2");
  if (s.noise.family == NoiseFamily::mixture) {
    check(s.noise.epsilon >= 0.0 && s.noise.epsilon <= 1.0, "scenario.epsilon", "must lie in [0, 1]");
    check(s.noise.var_small > 0.0, "scenario.var_small", "must be positive");
    check(s.noise.var_large > 0.0, "scenario.var_large", "must be positive");
  }
  check(s.amplitude_range.lo <= s.amplitude_range.hi, "scenario.amplitude_range", "needs lo <= hi");
  check(!(s.amplitude_range.lo == 0.0 && s.amplitude_range.hi == 0.0), "scenario.amplitude_range",
        "must contain nonzero amplitudes");
  check(s.sigma_range.lo > 0.0 && s.sigma_range.lo <= s.sigma_range.hi, "scenario.sigma_range",
        "needs 0 < lo <= hi");

  const auto& t = c.train;
  check(t.records > 0, "train.records", "must be positive");
  check(t.replicates > 0, "train.replicates", "must be positive");
  check(t.penalty_weight >= 0.0, "train.alpha", "must be non-negative");
  check(t.epochs > 0, "train.epochs", "must be positive");
  check(t.batch_size > 0, "train.batch_size", "must be positive");
  check(t.learning_rate > 0.0, "train.learning_rate", "must be positive");
  check(t.penalty_pairs_per_batch > 0, "train.penalty_pairs_per_batch", "must be positive");
  check(t.penalty_weight == 0.0 || t.penalty_estimator == MmdEstimator::biased || t.replicates >= 2,
        "train.replicates", "the unbiased penalty needs at least 2 replicates");
  for (std::size_t w : t.hidden_layers) check(w > 0, "train.hidden_layers", "widths must be positive");
  check(c.p1 > 0.0 && c.p1 < 1.0, "train.p1", "must lie in (0, 1)");
  if (c.bandwidth.kind == BandwidthPolicy::Kind::fixed)
    check(c.bandwidth.bandwidth > 0.0, "train.bandwidth", "must be positive");

  const auto& e = c.eval;
  check(e.mc_samples > 0, "eval.mc_samples", "must be positive");
  check(e.sigma_grid.size() >= 2, "eval.sigma_grid", "needs at least two noise scales");
  for (double v : e.sigma_grid) check(v > 0.0, "eval.sigma_grid", "entries must be positive");
  for (double v : e.amplitude_grid) check(v != 0.0, "eval.amplitude_grid", "entries must be nonzero");
  check(!e.target_fpr.empty(), "eval.target_fpr", "needs at least one entry");
  for (double v : e.target_fpr) check(v > 0.0 && v < 1.0, "eval.target_fpr", "entries must lie in (0, 1)");
  check(e.curve_points >= 2, "eval.curve_points", "must be at least 2");
  check(!c.output_dir.empty(), "output", "must be a non-empty path");
}

std::string to_json(const ExperimentConfig& c) {
  json doc;
  doc["scenario"] = {{"noise", to_string(c.scenario.noise.family)},
                     {"dim", c.scenario.dim},
                     {"epsilon", c.scenario.noise.epsilon},
                     {"var_small", c.scenario.noise.var_small},
                     {"var_large", c.scenario.noise.var_large},
                     {"amplitude_range", {c.scenario.amplitude_range.lo, c.scenario.amplitude_range.hi}},
                     {"sigma_range", {c.scenario.sigma_range.lo, c.scenario.sigma_range.hi}}};
  doc["train"] = {{"records", c.train.records},
                  {"replicates", c.train.replicates},
                  {"alpha", c.train.penalty_weight},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.learning_rate},
                  {"seed", c.train.seed},
                  {"penalty_pairs_per_batch", c.train.penalty_pairs_per_batch},
                  {"penalty_warmup_epochs", c.train.penalty_warmup_epochs},
                  {"hidden_layers", c.train.hidden_layers},
                  {"p1", c.p1}};
  if (c.bandwidth.kind == BandwidthPolicy::Kind::fixed)
    doc["train"]["bandwidth"] = c.bandwidth.bandwidth;
  else
    doc["train"]["bandwidth"] = "median";
  doc["train"]["penalty_estimator"] =
      c.train.penalty_estimator == MmdEstimator::unbiased ? "unbiased" : "biased";
  doc["train"]["penalty_pairing"] =
      c.train.penalty_pairing == TrainConfig::Pairing::stratified ? "stratified" : "random";
  doc["eval"] = {{"mc_samples", c.eval.mc_samples},
                 {"sigma_grid", c.eval.sigma_grid},
                 {"amplitude_grid", c.eval.amplitude_grid},
                 {"target_fpr", c.eval.target_fpr},
                 {"curve_points", c.eval.curve_points}};
  doc["output"] = c.output_dir.string();
  return doc.dump(2);
}

}  // namespace cfarnet::app
