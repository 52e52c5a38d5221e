#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cso/common.hpp"

namespace cso {

/// Malformed or invalid configuration. The message starts with the dotted
/// path of the offending field.
class ConfigError : public ParameterError {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : ParameterError(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Per-algorithm settings. Unset fields fall through to the preset.
struct AlgorithmSettings {
  std::optional<double> gamma;
  std::optional<std::int64_t> m;
  std::optional<std::int64_t> B1;
  std::optional<std::int64_t> B2;
  std::optional<double> p_out;
  std::optional<std::int64_t> S1;
  std::optional<std::int64_t> S2;
  std::optional<double> p_in;
  std::optional<int> order;
  std::optional<long> iterations;
  std::optional<std::uint64_t> inner_budget;
};

struct ProblemSettings {
  std::optional<std::uint64_t> n;
  std::optional<int> d;
  std::optional<double> noise_variance;
  std::optional<double> l2_coeff;
  std::optional<double> alpha;
  std::optional<std::uint64_t> data_seed;
  std::optional<int> eval_adaptation_steps;
  /// Dataset CSV written by `dataset`; replaces the generated data.
  std::optional<std::string> data_file;
};

struct ExperimentConfig {
  std::string preset;
  ProblemSettings problem;
  std::optional<std::vector<std::string>> algorithms;
  /// Top-level hyperparameter keys; they apply to every algorithm.
  AlgorithmSettings common;
  /// The "hyperparams" object, keyed by algorithm name.
  std::map<std::string, AlgorithmSettings> per_algorithm;
  std::optional<long> eval_every;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<std::string> metric;
  std::optional<std::string> optimizer;
  std::optional<double> adam_lr;
  std::optional<bool> adam_decay;
  std::optional<std::uint64_t> estimates;
  std::optional<std::uint64_t> reps;
  std::optional<std::vector<int>> m_list;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
/// Canonical form: only the fields that are set, keys sorted.
nlohmann::json dump_config(const ExperimentConfig& config);

/// Range and name checks on every set field.
void validate_config(const ExperimentConfig& config);

/// Fields set in `top` replace those in `base`.
AlgorithmSettings overlay(const AlgorithmSettings& base, const AlgorithmSettings& top);
ExperimentConfig overlay(const ExperimentConfig& base, const ExperimentConfig& top);

/// Reference for --help: every key with its meaning.
std::string config_help();

}  // namespace cso
