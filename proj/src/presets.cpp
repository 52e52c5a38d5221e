#include "cso/presets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "cso/runner.hpp"

namespace cso {

using nlohmann::json;

namespace {

const std::vector<std::string> kAllAlgorithms{"bsgd", "ebsgd", "bspiderboost", "ebspiderboost", "nestedvr",
                                              "enestedvr"};

AlgorithmSettings sgd(std::int64_t m, double gamma, long iterations) {
  AlgorithmSettings s;
  s.m = m;
  s.gamma = gamma;
  s.iterations = iterations;
  return s;
}

AlgorithmSettings spider(std::int64_t m, double gamma, long iterations) {
  AlgorithmSettings s = sgd(m, gamma, iterations);
  s.B1 = 100;
  s.B2 = 10;
  s.p_out = 0.1;
  return s;
}

AlgorithmSettings nested(std::int64_t outer, double gamma, long iterations) {
  AlgorithmSettings s;
  s.B1 = outer;
  s.B2 = outer;
  s.p_out = 1.0;
  s.S1 = 100;
  s.S2 = 10;
  s.p_in = 0.1;
  s.gamma = gamma;
  s.iterations = iterations;
  return s;
}

ExperimentConfig training_preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.seed = 0;
  c.seeds = 5;
  c.problem.data_seed = 0;
  auto& h = c.per_algorithm;
  if (name == "ilr_cso" || name == "ilr_fcco") {
    c.problem.d = 10;
    c.problem.noise_variance = 100.0;
    c.problem.l2_coeff = 1e-3;
    c.metric = "dist_to_ref";
    c.algorithms = kAllAlgorithms;
    if (name == "ilr_cso") {
      c.problem.n = 5000;
      // Equal inner draws per iteration: 2m = 12 for BSGD, 3m = 12 for E-BSGD.
      h["bsgd"] = sgd(6, 0.03, 300000);
      h["ebsgd"] = sgd(4, 0.03, 300000);
      h["bspiderboost"] = spider(6, 0.3, 30000);
      h["ebspiderboost"] = spider(4, 0.3, 30000);
      h["nestedvr"] = nested(10, 0.3, 50000);
      h["enestedvr"] = nested(5, 0.3, 50000);
      h["nestedvr"].inner_budget = h["enestedvr"].inner_budget = 3000000;
    } else {
      c.problem.n = 50;
      c.common.inner_budget = 3000000;
      h["bsgd"] = sgd(2, 0.1, 2000000);
      h["ebsgd"] = sgd(1, 0.1, 2000000);
      h["bspiderboost"] = spider(2, 0.3, 200000);
      h["ebspiderboost"] = spider(1, 0.3, 200000);
      h["nestedvr"] = nested(10, 0.3, 50000);
      h["enestedvr"] = nested(5, 0.3, 50000);
    }
  } else if (name == "iv_cso" || name == "iv_fcco") {
    c.problem.n = 1000;
    c.metric = "eval_loss";
    c.common.inner_budget = 20000;
    if (name == "iv_cso") {
      c.algorithms = std::vector<std::string>{"bsgd", "ebsgd", "bspiderboost", "ebspiderboost"};
      h["bsgd"] = sgd(2, 0.001, 20000);
      h["ebsgd"] = sgd(1, 0.001, 20000);
      h["bspiderboost"] = spider(2, 0.001, 20000);
      h["ebspiderboost"] = spider(1, 0.001, 20000);
    } else {
      c.algorithms = std::vector<std::string>{"nestedvr", "enestedvr"};
      h["nestedvr"] = nested(10, 0.001, 20000);
      h["enestedvr"] = nested(5, 0.001, 20000);
    }
  } else {
    c.problem.alpha = 0.01;
    c.problem.eval_adaptation_steps = 10;
    c.metric = "eval_loss";
    c.seeds = 1;
    c.optimizer = "adam";
    c.adam_lr = 1e-2;
    c.adam_decay = true;
    c.eval_every = 100;
    c.algorithms = std::vector<std::string>{"bsgd", "ebsgd"};
    h["bsgd"] = sgd(2, 0.0, 2000);
    h["ebsgd"] = sgd(1, 0.0, 2000);
    h["bsgd"].B1 = h["ebsgd"].B1 = 10;
  }
  return c;
}

std::vector<std::size_t> checkpoints(std::uint64_t total) {
  std::vector<std::size_t> out;
  for (std::uint64_t decade = 1; decade <= total; decade *= 10)
    for (std::uint64_t k : {1, 2, 5})
      if (k * decade <= total) out.push_back(static_cast<std::size_t>(k * decade));
  if (out.empty() || out.back() != total) out.push_back(static_cast<std::size_t>(total));
  return out;
}

std::string file_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

struct Curve {
  std::vector<std::size_t> n;
  std::vector<double> error;
  BiasMeasurement final;
};

Curve error_curve(ExtrapolationOrder order, const ScalarQuery& q, const Distribution& law, int m,
                  std::uint64_t estimates, const RngStream& rng) {
  Curve c;
  c.n = checkpoints(estimates);
  c.error = estimation_error_curve(order, q, 0.0, law, m, c.n, rng);
  c.final = measure_bias_and_variance(order, q, 0.0, law, m, std::max<std::size_t>(estimates, 100), rng);
  return c;
}

std::vector<CsvRow> curve_rows(const Curve& c) {
  std::vector<CsvRow> rows;
  for (std::size_t i = 0; i < c.n.size(); ++i) rows.push_back({std::to_string(c.n[i]), format_double(c.error[i])});
  return rows;
}

json run_error_curves(const ExperimentConfig& c, const std::string& out, std::vector<std::string>& files) {
  const int m = c.m_list->front();
  const RngStream root(*c.seed, 0xf16);
  std::vector<std::pair<std::string, std::string>> functions;
  if (c.preset == "fig1a")
    functions = {{"quad", ""}};
  else
    functions = {{"relu", "relu_"}, {"triwave", "triwave_"}};
  json summary = json::object();
  for (std::size_t f = 0; f < functions.size(); ++f) {
    const auto& [fn, tag] = functions[f];
    const Distribution law = Distribution::normal(10.0, 100.0);
    json per = json::object();
    for (int k = 1; k <= 3; ++k) {
      const Curve curve =
          error_curve(order_from_int(k), query_by_name(fn), law, m, *c.estimates, root.substream(f, k));
      const std::string path = file_in(out, c.preset + "_" + tag + "order" + std::to_string(k) + ".csv");
      write_csv(path, csv_header::error_curve, curve_rows(curve));
      files.push_back(path);
      per["order" + std::to_string(k)] = {{"final_abs_error", curve.error.back()},
                                          {"ci_halfwidth", curve.final.bias_ci_halfwidth},
                                          {"variance", curve.final.variance_est},
                                          {"true_value", curve.final.true_value}};
    }
    summary[fn] = per;
  }
  return summary;
}

json run_bias_sweep(const ExperimentConfig& c, const std::string& out, std::vector<std::string>& files) {
  json summary = json::object();
  for (int k = 1; k <= 3; ++k) {
    const auto rows = measure_bias_table(k, "quartic", *c.m_list, *c.reps, *c.seed);
    std::vector<CsvRow> csv;
    std::vector<double> bias;
    json per = json::array();
    for (const auto& r : rows) {
      csv.push_back({r[1], r[2], r[3], r[4], r[5]});
      bias.push_back(std::stod(r[2]));
      per.push_back({{"m", std::stoi(r[1])},
                     {"bias", std::stod(r[2])},
                     {"ci_halfwidth", std::stod(r[3])},
                     {"variance", std::stod(r[4])}});
    }
    const std::string path = file_in(out, "fig1b_order" + std::to_string(k) + ".csv");
    write_csv(path, csv_header::bias_sweep, csv);
    files.push_back(path);
    summary["order" + std::to_string(k)] = {{"slope", log_log_slope(*c.m_list, bias)}, {"points", per}};
  }
  return summary;
}

json run_moments(const ExperimentConfig& c, const std::string& out, std::vector<std::string>& files) {
  const RngStream root(*c.seed, 0x30e7);
  const std::vector<std::pair<std::string, Distribution>> laws{{"normal", Distribution::normal(0.0, 1.0)},
                                                               {"ramp", Distribution::ramp()}};
  std::vector<CsvRow> rows;
  json summary = json::array();
  double worst = 0.0;
  for (std::size_t l = 0; l < laws.size(); ++l) {
    const auto& [name, law] = laws[l];
    const double s2 = exact_central_moment(law, 2), s3 = exact_central_moment(law, 3), s4 = exact_central_moment(law, 4);
    for (int m : *c.m_list) {
      for (int k = 2; k <= 4; ++k) {
        RngStream rng = root.substream(l, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k));
        const double empirical = central_moment(SampleAverage{law, m}, k, rng, *c.estimates);
        const double predicted = predicted_moment_of_average(s2, s3, s4, m, k);
        // A vanishing prediction (symmetric laws, k = 3) is compared on the
        // scale of the averaged law instead.
        const double scale = predicted != 0.0 ? std::abs(predicted) : std::pow(s2 / m, 0.5 * k);
        const double rel = std::abs(empirical - predicted) / scale;
        worst = std::max(worst, rel);
        rows.push_back({name, std::to_string(m), std::to_string(k), format_double(empirical), format_double(predicted),
                        format_double(rel)});
        summary.push_back({{"law", name}, {"m", m}, {"k", k}, {"empirical", empirical}, {"predicted", predicted},
                           {"rel_error", rel}});
      }
    }
  }
  const std::string path = file_in(out, "moments_check.csv");
  write_csv(path, csv_header::moments, rows);
  files.push_back(path);
  return {{"rows", summary}, {"worst_rel_error", worst}};
}

std::shared_ptr<const CsoProblem> build_problem(const ExperimentConfig& c) {
  const ProblemSettings& p = c.problem;
  if (c.preset.rfind("ilr", 0) == 0) {
    if (p.data_file) return load_invariant_lr_csv(*p.data_file, *p.noise_variance, *p.l2_coeff);
    return make_invariant_lr(*p.n, *p.d, *p.noise_variance, *p.l2_coeff, *p.data_seed);
  }
  if (c.preset.rfind("iv", 0) == 0) {
    if (p.data_file) return load_iv_regression_csv(*p.data_file);
    return make_iv_regression(*p.n, *p.data_seed);
  }
  MamlOptions options;
  options.alpha = *p.alpha;
  options.eval_adaptation_steps = *p.eval_adaptation_steps;
  return std::make_shared<SinusoidMaml>(options, *p.data_seed);
}

HyperParams to_params(const AlgorithmSettings& s) {
  HyperParams h;
  if (s.gamma) h.gamma = *s.gamma;
  if (s.m) h.m = *s.m;
  if (s.B1) h.B1 = *s.B1;
  if (s.B2) h.B2 = *s.B2;
  if (s.p_out) h.p_out = *s.p_out;
  if (s.S1) h.S1 = *s.S1;
  if (s.S2) h.S2 = *s.S2;
  if (s.p_in) h.p_in = *s.p_in;
  if (s.order) h.order = order_from_int(*s.order);
  return h;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

json run_training(const ExperimentConfig& c, const std::string& out, std::vector<std::string>& files) {
  const auto problem = build_problem(c);
  const int seeds = *c.seeds;
  std::vector<SweepJob> jobs;
  for (const auto& name : *c.algorithms) {
    const AlgorithmSettings& s = c.per_algorithm.at(name);
    for (int k = 0; k < seeds; ++k) {
      RunConfig rc;
      rc.algorithm = algorithm_from_name(name);
      rc.params = to_params(s);
      rc.iterations = s.iterations.value_or(1000);
      rc.eval_every = c.eval_every.value_or(std::max(1L, rc.iterations / 100));
      rc.seed = *c.seed + static_cast<std::uint64_t>(k);
      rc.metric = metric_from_name(*c.metric);
      rc.inner_budget = s.inner_budget;
      rc.optimizer = optimizer_from_name(c.optimizer.value_or("sgd"));
      rc.adam_lr = c.adam_lr.value_or(1e-3);
      rc.adam_decay = c.adam_decay.value_or(false);
      jobs.push_back({problem, rc});
    }
  }
  const auto traces = run_sweep(jobs);

  json algorithms = json::object();
  std::size_t j = 0;
  for (const auto& name : *c.algorithms) {
    json entry = {{"final", json::array()},         {"initial", json::array()},  {"iterations", json::array()},
                  {"inner_samples", json::array()}, {"outer_samples", json::array()}, {"diverged", false}};
    std::vector<double> finals;
    for (int k = 0; k < seeds; ++k, ++j) {
      const RunTrace& t = traces[j];
      std::string file = c.preset + "_" + name + (seeds > 1 ? "_s" + std::to_string(k) : "") + ".csv";
      const std::string path = file_in(out, file);
      write_trace_csv(path, t);
      files.push_back(path);
      finals.push_back(t.final_metric());
      entry["final"].push_back(t.final_metric());
      entry["initial"].push_back(t.rows.front().metric);
      entry["iterations"].push_back(t.iterations_done);
      entry["inner_samples"].push_back(t.samples.inner);
      entry["outer_samples"].push_back(t.samples.outer);
      if (t.diverged) {
        entry["diverged"] = true;
        entry["diagnostic"] = t.diagnostic;
      }
    }
    entry["median"] = median(finals);
    algorithms[name] = entry;
  }
  return {{"metric", *c.metric}, {"algorithms", algorithms}};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1a", "fig1b", "fig5", "ilr_cso", "ilr_fcco", "iv_cso", "iv_fcco", "maml_sine", "moments_check"};
}

ExperimentConfig preset_defaults(const std::string& name) {
  ExperimentConfig c;
  if (name == "fig1a" || name == "fig5") {
    c.preset = name;
    c.seed = 0;
    c.m_list = std::vector<int>{1};
    c.estimates = name == "fig1a" ? 1000000 : 100000;
    return c;
  }
  if (name == "fig1b") {
    c.preset = name;
    c.seed = 0;
    c.m_list = std::vector<int>{1, 2, 4, 8, 16};
    c.reps = 1000000;
    return c;
  }
  if (name == "moments_check") {
    c.preset = name;
    c.seed = 0;
    c.m_list = std::vector<int>{1, 2, 4, 8};
    c.estimates = 1000000;
    return c;
  }
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("preset", "unknown preset '" + name + "' (" + list + ")");
  }
  return training_preset(name);
}

ExperimentConfig resolve_config(const ExperimentConfig& user) {
  validate_config(user);
  const ExperimentConfig base = preset_defaults(user.preset);
  ExperimentConfig c = overlay(base, user);
  c.common = AlgorithmSettings{};
  c.per_algorithm.clear();
  if (c.algorithms) {
    for (const auto& name : *c.algorithms) {
      const auto pick = [&](const ExperimentConfig& src) {
        const auto it = src.per_algorithm.find(name);
        return it == src.per_algorithm.end() ? AlgorithmSettings{} : it->second;
      };
      c.per_algorithm[name] = overlay(overlay(overlay(base.common, pick(base)), user.common), pick(user));
    }
  } else if (!user.per_algorithm.empty()) {
    throw ConfigError("hyperparams", "preset '" + c.preset + "' runs no optimizers");
  }
  validate_config(c);
  return c;
}

ExperimentResult run_experiment(const ExperimentConfig& user, const std::string& out_dir) {
  const ExperimentConfig c = resolve_config(user);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

  ExperimentResult result;
  json body;
  if (c.preset == "fig1a" || c.preset == "fig5")
    body = run_error_curves(c, out_dir, result.files);
  else if (c.preset == "fig1b")
    body = run_bias_sweep(c, out_dir, result.files);
  else if (c.preset == "moments_check")
    body = run_moments(c, out_dir, result.files);
  else
    body = run_training(c, out_dir, result.files);

  result.summary = {{"preset", c.preset}, {"config", dump_config(c)}, {"results", body}};
  json files = json::array();
  for (const auto& f : result.files) files.push_back(std::filesystem::path(f).filename().string());
  result.summary["files"] = files;

  const std::string path = file_in(out_dir, "summary.json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << result.summary.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
  result.files.push_back(path);
  return result;
}

ScalarQuery query_by_name(const std::string& name) {
  if (name == "quad") return testfn::half_square();
  if (name == "quartic") return testfn::quartic();
  if (name == "relu") return testfn::relu();
  if (name == "triwave") return testfn::perturbed_quadratic();
  throw ParameterError("unknown function '" + name + "' (quad, quartic, relu, triwave)");
}

Distribution default_law_for(const std::string& function) {
  query_by_name(function);
  return function == "quartic" ? Distribution::ramp() : Distribution::normal(10.0, 100.0);
}

std::vector<CsvRow> measure_bias_table(int order, const std::string& function, const std::vector<int>& m_list,
                                       std::size_t reps, std::uint64_t seed) {
  const ScalarQuery q = query_by_name(function);
  const Distribution law = default_law_for(function);
  const RngStream root(seed, 0xb1a5);
  MeasureOptions options;
  options.control_variate = true;
  std::vector<CsvRow> rows;
  for (int m : m_list) {
    const auto r = measure_bias_and_variance(order_from_int(order), q, 0.0, law, m, reps,
                                             root.substream(static_cast<std::uint64_t>(order),
                                                            static_cast<std::uint64_t>(m)),
                                             options);
    rows.push_back({std::to_string(order), std::to_string(m), format_double(r.bias_est),
                    format_double(r.bias_ci_halfwidth), format_double(r.variance_est), std::to_string(r.reps)});
  }
  return rows;
}

double log_log_slope(const std::vector<int>& m_list, const std::vector<double>& bias) {
  require(m_list.size() == bias.size() && m_list.size() >= 2, "slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(m_list.size());
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    const double x = std::log(static_cast<double>(m_list[i]));
    const double y = std::log(std::max(std::abs(bias[i]), 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace cso
