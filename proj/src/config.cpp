#include "cso/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cso/runner.hpp"

namespace cso {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (const auto& item : obj.items())
    if (!known.count(item.key())) throw ConfigError(join(path, item.key()), "unknown field");
}

void read(const json& obj, const std::string& key, const std::string& path, std::optional<double>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  out = v.get<double>();
}

template <class Int>
  requires std::is_integral_v<Int>
void read(const json& obj, const std::string& key, const std::string& path, std::optional<Int>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (v.is_number_unsigned()) {
      out = v.get<Int>();
      return;
    }
    if (v.get<std::int64_t>() < 0) throw ConfigError(join(path, key), "must be >= 0");
  }
  out = v.get<Int>();
}

void read(const json& obj, const std::string& key, const std::string& path, std::optional<bool>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  out = v.get<bool>();
}

void read(const json& obj, const std::string& key, const std::string& path, std::optional<std::string>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  out = v.get<std::string>();
}

const std::set<std::string> kAlgorithmKeys{"gamma", "m",  "B1",    "B2",         "p_out",       "S1",
                                           "S2",    "p_in", "order", "iterations", "inner_budget"};
const std::set<std::string> kProblemKeys{"n",        "d",         "noise_variance",        "l2_coeff",
                                         "alpha",    "data_seed", "eval_adaptation_steps", "data_file"};

AlgorithmSettings parse_algorithm(const json& obj, const std::string& path) {
  AlgorithmSettings s;
  read(obj, "gamma", path, s.gamma);
  read(obj, "m", path, s.m);
  read(obj, "B1", path, s.B1);
  read(obj, "B2", path, s.B2);
  read(obj, "p_out", path, s.p_out);
  read(obj, "S1", path, s.S1);
  read(obj, "S2", path, s.S2);
  read(obj, "p_in", path, s.p_in);
  read(obj, "order", path, s.order);
  read(obj, "iterations", path, s.iterations);
  read(obj, "inner_budget", path, s.inner_budget);
  return s;
}

template <class T>
void put(json& obj, const std::string& key, const std::optional<T>& v) {
  if (v) obj[key] = *v;
}

json dump_algorithm(const AlgorithmSettings& s) {
  json obj = json::object();
  put(obj, "gamma", s.gamma);
  put(obj, "m", s.m);
  put(obj, "B1", s.B1);
  put(obj, "B2", s.B2);
  put(obj, "p_out", s.p_out);
  put(obj, "S1", s.S1);
  put(obj, "S2", s.S2);
  put(obj, "p_in", s.p_in);
  put(obj, "order", s.order);
  put(obj, "iterations", s.iterations);
  put(obj, "inner_budget", s.inner_budget);
  return obj;
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

void validate_algorithm(const AlgorithmSettings& s, const std::string& path) {
  if (s.gamma) check(std::isfinite(*s.gamma) && *s.gamma >= 0.0, join(path, "gamma"), "must be a finite value >= 0");
  if (s.m) check(*s.m >= 1, join(path, "m"), "must be >= 1");
  if (s.B1) check(*s.B1 >= 1, join(path, "B1"), "must be >= 1");
  if (s.B2) check(*s.B2 >= 1, join(path, "B2"), "must be >= 1");
  if (s.B1 && s.B2) check(*s.B2 <= *s.B1, join(path, "B2"), "must not exceed B1");
  if (s.S1) check(*s.S1 >= 1, join(path, "S1"), "must be >= 1");
  if (s.S2) check(*s.S2 >= 1, join(path, "S2"), "must be >= 1");
  if (s.S1 && s.S2) check(*s.S2 <= *s.S1, join(path, "S2"), "must not exceed S1");
  if (s.p_out) check(*s.p_out > 0.0 && *s.p_out <= 1.0, join(path, "p_out"), "must lie in (0, 1]");
  if (s.p_in) check(*s.p_in > 0.0 && *s.p_in <= 1.0, join(path, "p_in"), "must lie in (0, 1]");
  if (s.order) check(*s.order >= 1 && *s.order <= 3, join(path, "order"), "must be 1, 2 or 3");
  if (s.iterations) check(*s.iterations >= 1, join(path, "iterations"), "must be >= 1");
  if (s.inner_budget) check(*s.inner_budget >= 1, join(path, "inner_budget"), "must be >= 1");
}

template <class T>
void take(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  std::set<std::string> known = kAlgorithmKeys;
  for (const char* k : {"preset", "problem", "algorithms", "hyperparams", "eval_every", "seed", "seeds", "metric",
                        "optimizer", "adam_lr", "adam_decay", "estimates", "reps", "m_list"})
    known.insert(k);
  reject_unknown(doc, "", known);

  ExperimentConfig c;
  if (!doc.contains("preset")) throw ConfigError("preset", "missing");
  if (!doc.at("preset").is_string()) throw ConfigError("preset", "expected a string");
  c.preset = doc.at("preset").get<std::string>();

  if (doc.contains("problem")) {
    const json& p = doc.at("problem");
    if (!p.is_object()) throw ConfigError("problem", "expected an object");
    reject_unknown(p, "problem", kProblemKeys);
    read(p, "n", "problem", c.problem.n);
    read(p, "d", "problem", c.problem.d);
    read(p, "noise_variance", "problem", c.problem.noise_variance);
    read(p, "l2_coeff", "problem", c.problem.l2_coeff);
    read(p, "alpha", "problem", c.problem.alpha);
    read(p, "data_seed", "problem", c.problem.data_seed);
    read(p, "eval_adaptation_steps", "problem", c.problem.eval_adaptation_steps);
    read(p, "data_file", "problem", c.problem.data_file);
  }
  if (doc.contains("algorithms")) {
    const json& a = doc.at("algorithms");
    if (!a.is_array()) throw ConfigError("algorithms", "expected an array of names");
    std::vector<std::string> names;
    for (const auto& v : a) {
      if (!v.is_string()) throw ConfigError("algorithms", "expected an array of names");
      names.push_back(v.get<std::string>());
    }
    c.algorithms = names;
  }
  c.common = parse_algorithm(doc, "");
  if (doc.contains("hyperparams")) {
    const json& h = doc.at("hyperparams");
    if (!h.is_object()) throw ConfigError("hyperparams", "expected an object keyed by algorithm");
    for (const auto& item : h.items()) {
      const std::string path = "hyperparams." + item.key();
      if (!item.value().is_object()) throw ConfigError(path, "expected an object");
      reject_unknown(item.value(), path, kAlgorithmKeys);
      c.per_algorithm[item.key()] = parse_algorithm(item.value(), path);
    }
  }
  read(doc, "eval_every", "", c.eval_every);
  read(doc, "seed", "", c.seed);
  read(doc, "seeds", "", c.seeds);
  read(doc, "metric", "", c.metric);
  read(doc, "optimizer", "", c.optimizer);
  read(doc, "adam_lr", "", c.adam_lr);
  read(doc, "adam_decay", "", c.adam_decay);
  read(doc, "estimates", "", c.estimates);
  read(doc, "reps", "", c.reps);
  if (doc.contains("m_list")) {
    const json& a = doc.at("m_list");
    if (!a.is_array()) throw ConfigError("m_list", "expected an array of integers");
    std::vector<int> ms;
    for (const auto& v : a) {
      if (!v.is_number_integer()) throw ConfigError("m_list", "expected an array of integers");
      ms.push_back(v.get<int>());
    }
    c.m_list = ms;
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON in '") + path + "': " + e.what());
  }
  return parse_config(doc);
}

json dump_config(const ExperimentConfig& c) {
  json doc = dump_algorithm(c.common);
  doc["preset"] = c.preset;
  json p = json::object();
  put(p, "n", c.problem.n);
  put(p, "d", c.problem.d);
  put(p, "noise_variance", c.problem.noise_variance);
  put(p, "l2_coeff", c.problem.l2_coeff);
  put(p, "alpha", c.problem.alpha);
  put(p, "data_seed", c.problem.data_seed);
  put(p, "eval_adaptation_steps", c.problem.eval_adaptation_steps);
  put(p, "data_file", c.problem.data_file);
  if (!p.empty()) doc["problem"] = p;
  put(doc, "algorithms", c.algorithms);
  if (!c.per_algorithm.empty()) {
    json h = json::object();
    for (const auto& [name, s] : c.per_algorithm) h[name] = dump_algorithm(s);
    doc["hyperparams"] = h;
  }
  put(doc, "eval_every", c.eval_every);
  put(doc, "seed", c.seed);
  put(doc, "seeds", c.seeds);
  put(doc, "metric", c.metric);
  put(doc, "optimizer", c.optimizer);
  put(doc, "adam_lr", c.adam_lr);
  put(doc, "adam_decay", c.adam_decay);
  put(doc, "estimates", c.estimates);
  put(doc, "reps", c.reps);
  put(doc, "m_list", c.m_list);
  return doc;
}

void validate_config(const ExperimentConfig& c) {
  check(!c.preset.empty(), "preset", "must name a preset");
  const ProblemSettings& p = c.problem;
  if (p.n) check(*p.n >= 1, "problem.n", "must be >= 1");
  if (p.d) check(*p.d >= 1, "problem.d", "must be >= 1");
  if (p.noise_variance) check(*p.noise_variance >= 0.0, "problem.noise_variance", "must be >= 0");
  if (p.l2_coeff) check(*p.l2_coeff >= 0.0, "problem.l2_coeff", "must be >= 0");
  if (p.alpha) check(*p.alpha >= 0.0, "problem.alpha", "must be >= 0");
  if (p.eval_adaptation_steps) check(*p.eval_adaptation_steps >= 0, "problem.eval_adaptation_steps", "must be >= 0");
  if (c.algorithms) {
    check(!c.algorithms->empty(), "algorithms", "must not be empty");
    for (const auto& name : *c.algorithms) {
      try {
        algorithm_from_name(name);
      } catch (const ParameterError& e) {
        throw ConfigError("algorithms", e.what());
      }
    }
  }
  validate_algorithm(c.common, "");
  for (const auto& [name, s] : c.per_algorithm) {
    try {
      algorithm_from_name(name);
    } catch (const ParameterError& e) {
      throw ConfigError("hyperparams." + name, e.what());
    }
    validate_algorithm(s, "hyperparams." + name);
  }
  if (c.eval_every) check(*c.eval_every >= 1, "eval_every", "must be >= 1");
  if (c.seeds) check(*c.seeds >= 1, "seeds", "must be >= 1");
  if (c.metric) {
    try {
      metric_from_name(*c.metric);
    } catch (const ParameterError& e) {
      throw ConfigError("metric", e.what());
    }
  }
  if (c.optimizer) {
    try {
      optimizer_from_name(*c.optimizer);
    } catch (const ParameterError& e) {
      throw ConfigError("optimizer", e.what());
    }
  }
  if (c.adam_lr) check(std::isfinite(*c.adam_lr) && *c.adam_lr > 0.0, "adam_lr", "must be > 0");
  if (c.estimates) check(*c.estimates >= 1, "estimates", "must be >= 1");
  if (c.reps) check(*c.reps >= 2, "reps", "must be >= 2");
  if (c.m_list) {
    check(!c.m_list->empty(), "m_list", "must not be empty");
    for (int m : *c.m_list) check(m >= 1, "m_list", "every m must be >= 1");
  }
}

AlgorithmSettings overlay(const AlgorithmSettings& base, const AlgorithmSettings& top) {
  AlgorithmSettings s = base;
  take(s.gamma, top.gamma);
  take(s.m, top.m);
  take(s.B1, top.B1);
  take(s.B2, top.B2);
  take(s.p_out, top.p_out);
  take(s.S1, top.S1);
  take(s.S2, top.S2);
  take(s.p_in, top.p_in);
  take(s.order, top.order);
  take(s.iterations, top.iterations);
  take(s.inner_budget, top.inner_budget);
  return s;
}

ExperimentConfig overlay(const ExperimentConfig& base, const ExperimentConfig& top) {
  ExperimentConfig c = base;
  if (!top.preset.empty()) c.preset = top.preset;
  take(c.problem.n, top.problem.n);
  take(c.problem.d, top.problem.d);
  take(c.problem.noise_variance, top.problem.noise_variance);
  take(c.problem.l2_coeff, top.problem.l2_coeff);
  take(c.problem.alpha, top.problem.alpha);
  take(c.problem.data_seed, top.problem.data_seed);
  take(c.problem.eval_adaptation_steps, top.problem.eval_adaptation_steps);
  take(c.problem.data_file, top.problem.data_file);
  take(c.algorithms, top.algorithms);
  c.common = overlay(c.common, top.common);
  for (const auto& [name, s] : top.per_algorithm) c.per_algorithm[name] = overlay(c.per_algorithm[name], s);
  take(c.eval_every, top.eval_every);
  take(c.seed, top.seed);
  take(c.seeds, top.seeds);
  take(c.metric, top.metric);
  take(c.optimizer, top.optimizer);
  take(c.adam_lr, top.adam_lr);
  take(c.adam_decay, top.adam_decay);
  take(c.estimates, top.estimates);
  take(c.reps, top.reps);
  take(c.m_list, top.m_list);
  return c;
}

std::string config_help() {
  std::ostringstream out;
  out << "Config file (JSON). Only \"preset\" is required; every other field overrides the preset default.\n"
         "  preset            fig1a fig1b fig5 ilr_cso ilr_fcco iv_cso iv_fcco maml_sine moments_check\n"
         "  problem.n         number of records (ilr, iv)\n"
         "  problem.d         feature dimension (ilr)\n"
         "  problem.noise_variance, problem.l2_coeff   (ilr)\n"
         "  problem.alpha     inner step size (maml)\n"
         "  problem.eval_adaptation_steps              (maml)\n"
         "  problem.data_seed seed of the generated data set\n"
         "  problem.data_file dataset CSV to load instead of generating one\n"
         "  algorithms        subset of bsgd ebsgd bspiderboost ebspiderboost nestedvr enestedvr\n"
         "  gamma m B1 B2 p_out S1 S2 p_in order iterations inner_budget\n"
         "                    hyperparameters applied to every algorithm\n"
         "  hyperparams.<alg>.<key>   the same keys for one algorithm\n"
         "  seed seeds eval_every metric optimizer adam_lr adam_decay\n"
         "  estimates reps m_list     bias-measurement presets\n";
  return out.str();
}

}  // namespace cso
