#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cso/config.hpp"
#include "cso/presets.hpp"

using namespace cso;
using nlohmann::json;

TEST_CASE("minimal config takes the preset defaults") {
  const ExperimentConfig c = resolve_config(parse_config(json{{"preset", "iv_cso"}}));
  CHECK(c.problem.n == 1000u);
  CHECK(c.seeds == 5);
  CHECK(c.metric == "eval_loss");
  REQUIRE(c.algorithms);
  CHECK(c.algorithms->size() == 4);
  CHECK(c.per_algorithm.at("bsgd").m == 2);
  CHECK(c.per_algorithm.at("ebsgd").m == 1);
  CHECK(c.per_algorithm.at("bsgd").inner_budget == c.per_algorithm.at("ebsgd").inner_budget);
}

TEST_CASE("validation errors name the field") {
  try {
    parse_config(json{{"preset", "iv_cso"}, {"gamma", -1}});
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "gamma");
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(parse_config(json{{"preset", "x"}, {"hyperparams", {{"bsgd", {{"p_in", 2.0}}}}}}),
                       doctest::Contains("hyperparams.bsgd.p_in"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json{{"preset", "x"}, {"gama", 1.0}}), doctest::Contains("gama"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json{{"preset", "x"}, {"seeds", "five"}}), doctest::Contains("seeds"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json{{"gamma", 1.0}}), doctest::Contains("preset"), ConfigError);
  CHECK_THROWS_WITH_AS(resolve_config(parse_config(json{{"preset", "fig9"}})), doctest::Contains("unknown preset"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json{{"preset", "x"}, {"algorithms", {"sgd"}}}), doctest::Contains("algorithms"),
                       ConfigError);
}

TEST_CASE("dump of load is the canonical form") {
  const json doc = json::parse(R"({
    "seeds": 2, "preset": "ilr_fcco", "gamma": 0.5,
    "problem": {"n": 40, "noise_variance": 10.0},
    "hyperparams": {"enestedvr": {"S1": 50, "S2": 5}},
    "algorithms": ["nestedvr", "enestedvr"]
  })");
  const json once = dump_config(parse_config(doc));
  CHECK(once == doc);
  CHECK(dump_config(parse_config(once)) == once);
}

TEST_CASE("config files load from disk") {
  const auto path = std::filesystem::temp_directory_path() / "cso_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"preset": "fig1a", "estimates": 1000})";
  }
  const ExperimentConfig c = load_config(path.string());
  CHECK(c.estimates == 1000u);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_config(path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("override precedence") {
  ExperimentConfig user = parse_config(json{{"preset", "ilr_fcco"},
                                            {"gamma", 0.05},
                                            {"hyperparams", {{"ebsgd", {{"gamma", 0.01}}}}},
                                            {"inner_budget", 1000}});
  const ExperimentConfig c = resolve_config(user);
  CHECK(c.per_algorithm.at("bsgd").gamma == 0.05);
  CHECK(c.per_algorithm.at("ebsgd").gamma == 0.01);
  CHECK(c.per_algorithm.at("ebsgd").m == 1);
  CHECK(c.per_algorithm.at("nestedvr").inner_budget == 1000u);
}

TEST_CASE("every preset resolves") {
  for (const auto& name : preset_names()) {
    ExperimentConfig user;
    user.preset = name;
    CHECK_NOTHROW(resolve_config(user));
  }
}
