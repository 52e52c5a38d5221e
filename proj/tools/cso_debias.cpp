#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cso/config.hpp"
#include "cso/csv.hpp"
#include "cso/hyperparams.hpp"
#include "cso/presets.hpp"
#include "cso/problems.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_csv(std::ostream& out, const cso::CsvRow& header, const std::vector<cso::CsvRow>& rows) {
  auto line = [&](const cso::CsvRow& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

struct RunArgs {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::string out = "out";
  std::string algorithms;
  std::optional<long> iterations;
};

int do_run(const RunArgs& a) {
  cso::ExperimentConfig user;
  if (!a.config.empty()) {
    user = cso::load_config(a.config);
    if (!a.preset.empty()) user.preset = a.preset;
  } else {
    user.preset = a.preset;
  }
  if (a.seed) user.seed = a.seed;
  if (a.seeds) user.seeds = a.seeds;
  if (!a.algorithms.empty()) user.algorithms = split_list(a.algorithms);
  if (a.iterations) user.common.iterations = a.iterations;
  const auto result = cso::run_experiment(user, a.out);
  for (const auto& f : result.files) std::cout << f << '\n';
  return 0;
}

struct SuggestArgs {
  std::string theorem;
  double epsilon = 0.1;
  std::optional<std::size_t> n;
  std::optional<double> ce_cg;
  double multiplier = 1.0;
  std::string problem;
  cso::SmoothnessConstants constants;
};

int do_suggest(SuggestArgs a) {
  if (!a.problem.empty()) {
    std::shared_ptr<cso::CsoProblem> p;
    if (a.problem == "ilr")
      p = cso::make_invariant_lr(a.n.value_or(1000), 10, 100.0, 1e-3, 0);
    else if (a.problem == "iv")
      p = cso::make_iv_regression(a.n.value_or(1000), 0);
    else
      throw cso::ParameterError("unknown problem '" + a.problem + "' (ilr, iv)");
    cso::RngStream rng(0, 0xc0);
    a.constants = cso::compute_constants(*p, 10, rng);
  } else {
    a.constants.derive();
  }
  cso::SuggestOptions opts;
  opts.multiplier = a.multiplier;
  opts.ce_cg = a.ce_cg;
  cso::HyperParams h;
  if (a.theorem == "envr") {
    if (!a.n) throw cso::ParameterError("--theorem envr needs --n");
    h = cso::suggest_envr(a.constants, a.epsilon, *a.n, opts);
  } else {
    h = cso::suggest_hyperparams(cso::theorem_from_name(a.theorem), a.constants, a.epsilon, a.n, opts);
  }
  print_csv(std::cout, {"theorem", "gamma", "m", "B1", "B2", "p_out", "S1", "S2", "p_in", "order"},
            {{a.theorem, cso::format_double(h.gamma), std::to_string(h.m), std::to_string(h.B1),
              std::to_string(h.B2), cso::format_double(h.p_out), std::to_string(h.S1), std::to_string(h.S2),
              cso::format_double(h.p_in), std::to_string(cso::order_value(h.order))}});
  return 0;
}

struct BiasArgs {
  int order = 2;
  std::string function = "quad";
  std::string m_list = "1,2,4,8,16";
  std::size_t reps = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

int do_measure_bias(const BiasArgs& a) {
  std::vector<int> ms;
  for (const auto& s : split_list(a.m_list)) ms.push_back(std::stoi(s));
  if (ms.empty()) throw cso::ParameterError("--m needs at least one value");
  const auto rows = cso::measure_bias_table(a.order, a.function, ms, a.reps, a.seed);
  if (a.out.empty())
    print_csv(std::cout, cso::csv_header::measure_bias, rows);
  else
    cso::write_csv(a.out, cso::csv_header::measure_bias, rows);
  return 0;
}

struct DatasetArgs {
  std::string problem = "ilr";
  std::size_t n = 1000;
  int d = 10;
  std::uint64_t seed = 0;
  std::string out;
};

int do_dataset(const DatasetArgs& a) {
  if (a.problem == "ilr")
    cso::dump_dataset_csv(*cso::make_invariant_lr(a.n, a.d, 100.0, 1e-3, a.seed), a.out);
  else if (a.problem == "iv")
    cso::dump_dataset_csv(*cso::make_iv_regression(a.n, a.seed), a.out);
  else
    throw cso::ParameterError("unknown problem '" + a.problem + "' (ilr, iv)");
  std::cout << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-reduced estimators for conditional stochastic optimization"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a preset or a JSON config; writes CSV files and summary.json");
  auto* preset_opt = run_cmd->add_option("--preset", run.preset, "Preset name");
  auto* config_opt = run_cmd->add_option("--config", run.config, "JSON config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Base seed");
  run_cmd->add_option("--seeds", run.seeds, "Number of seeds");
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--algorithms", run.algorithms, "Comma-separated algorithm list");
  run_cmd->add_option("--iterations", run.iterations, "Iterations for every algorithm");
  run_cmd->footer(cso::config_help());
  preset_opt->excludes(config_opt);

  SuggestArgs suggest;
  auto* suggest_cmd = app.add_subcommand("suggest", "Hyperparameters from the convergence theorems");
  suggest_cmd->add_option("--theorem", suggest.theorem, "ebsgd, ebsb, envr, envr_small_n, envr_large_n, nvr")
      ->required();
  suggest_cmd->add_option("--epsilon", suggest.epsilon, "Target accuracy")->capture_default_str();
  suggest_cmd->add_option("--n", suggest.n, "Number of outer indices (FCCO theorems)");
  suggest_cmd->add_option("--ce-cg", suggest.ce_cg, "Use this value of C_e C_g");
  suggest_cmd->add_option("--multiplier", suggest.multiplier, "Scale of every batch size")->capture_default_str();
  suggest_cmd->add_option("--problem", suggest.problem, "Estimate the constants on ilr or iv");
  auto& k = suggest.constants;
  k.a = {1.0, 1.0, 1.0, 1.0};
  k.sigma2 = k.sigma3 = k.sigma4 = 1.0;
  k.C_f = k.C_g = k.L_f = k.L_g = k.sigma_g = k.zeta_g = 1.0;
  suggest_cmd->add_option("--a1", k.a[0], "sup |d grad f|")->capture_default_str();
  suggest_cmd->add_option("--a2", k.a[1], "sup |d^2 grad f|")->capture_default_str();
  suggest_cmd->add_option("--a3", k.a[2], "sup |d^3 grad f|")->capture_default_str();
  suggest_cmd->add_option("--a4", k.a[3], "sup |d^4 grad f|")->capture_default_str();
  suggest_cmd->add_option("--sigma2", k.sigma2)->capture_default_str();
  suggest_cmd->add_option("--sigma3", k.sigma3)->capture_default_str();
  suggest_cmd->add_option("--sigma4", k.sigma4)->capture_default_str();
  suggest_cmd->add_option("--C-f", k.C_f)->capture_default_str();
  suggest_cmd->add_option("--C-g", k.C_g)->capture_default_str();
  suggest_cmd->add_option("--L-f", k.L_f)->capture_default_str();
  suggest_cmd->add_option("--L-g", k.L_g)->capture_default_str();
  suggest_cmd->add_option("--sigma-g", k.sigma_g)->capture_default_str();
  suggest_cmd->add_option("--zeta-g", k.zeta_g)->capture_default_str();

  BiasArgs bias;
  auto* bias_cmd = app.add_subcommand("measure-bias", "Monte Carlo bias of an extrapolation operator");
  bias_cmd->add_option("--order", bias.order, "1, 2 or 3")->check(CLI::Range(1, 3))->capture_default_str();
  bias_cmd->add_option("--function", bias.function, "quad, quartic, relu, triwave")
      ->check(CLI::IsMember({"quad", "quartic", "relu", "triwave"}))
      ->capture_default_str();
  bias_cmd->add_option("--m", bias.m_list, "Comma-separated inner batch sizes")->capture_default_str();
  bias_cmd->add_option("--reps", bias.reps, "Operator applications per m")->capture_default_str();
  bias_cmd->add_option("--seed", bias.seed)->capture_default_str();
  bias_cmd->add_option("--out", bias.out, "CSV file (default stdout)");

  DatasetArgs data;
  auto* data_cmd = app.add_subcommand("dataset", "Write a generated data set as CSV");
  data_cmd->add_option("--problem", data.problem, "ilr or iv")->capture_default_str();
  data_cmd->add_option("--n", data.n)->capture_default_str();
  data_cmd->add_option("--d", data.d)->capture_default_str();
  data_cmd->add_option("--seed", data.seed)->capture_default_str();
  data_cmd->add_option("--out", data.out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run_cmd->parsed()) {
      if (run.preset.empty() && run.config.empty()) throw cso::ParameterError("run needs --preset or --config");
      return do_run(run);
    }
    if (suggest_cmd->parsed()) return do_suggest(suggest);
    if (bias_cmd->parsed()) return do_measure_bias(bias);
    if (data_cmd->parsed()) return do_dataset(data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
