#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cso/config.hpp"
#include "cso/csv.hpp"
#include "cso/extrapolation.hpp"

namespace cso {

std::vector<std::string> preset_names();

/// Everything a preset fixes: problem, algorithms, budgets and seeds.
ExperimentConfig preset_defaults(const std::string& name);

/// Preset defaults overlaid by `user`. Top-level hyperparameters are folded
/// into each listed algorithm: preset common < preset per-algorithm < user
/// common < user per-algorithm.
ExperimentConfig resolve_config(const ExperimentConfig& user);

struct ExperimentResult {
  nlohmann::json summary;
  std::vector<std::string> files;
};

/// Runs the resolved experiment, writes its CSV files and summary.json into
/// `out_dir` (created if missing) and returns the summary.
ExperimentResult run_experiment(const ExperimentConfig& user, const std::string& out_dir);

/// Test functions by CLI name: quad, quartic, relu, triwave.
ScalarQuery query_by_name(const std::string& name);
/// quartic uses the law t/2 on [0, 2]; the others Normal(10, 100).
Distribution default_law_for(const std::string& function);

/// One row per m: bias estimate, its 95% half-width and the output variance.
std::vector<CsvRow> measure_bias_table(int order, const std::string& function, const std::vector<int>& m_list,
                                       std::size_t reps, std::uint64_t seed);

/// Least-squares slope of log|bias| against log m.
double log_log_slope(const std::vector<int>& m_list, const std::vector<double>& bias);

}  // namespace cso
