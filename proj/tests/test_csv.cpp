#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "cso/csv.hpp"
#include "cso/presets.hpp"

using namespace cso;

namespace {

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("17 significant digits with a dot separator") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(50.0) == "50");
  CHECK(format_double(-1.5e-7) == "-1.4999999999999999e-07");
}

TEST_CASE("golden header: error curves") {
  const auto dir = scratch_dir("cso_golden_fig1a");
  ExperimentConfig c;
  c.preset = "fig1a";
  c.estimates = 200;
  c.seed = 7;
  const auto result = run_experiment(c, dir.string());
  for (int k = 1; k <= 3; ++k)
    CHECK(first_line(dir / ("fig1a_order" + std::to_string(k) + ".csv")) == "n_estimates,abs_error");
  CHECK(result.summary["files"].size() == 3);
  CHECK(std::filesystem::exists(dir / "summary.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("golden header: training traces") {
  const auto dir = scratch_dir("cso_golden_ilr");
  ExperimentConfig c;
  c.preset = "ilr_fcco";
  c.algorithms = std::vector<std::string>{"nestedvr", "enestedvr"};
  c.seeds = 1;
  c.common.iterations = 5;
  run_experiment(c, dir.string());
  CHECK(first_line(dir / "ilr_fcco_nestedvr.csv") == "iter,inner_samples,outer_samples,error");
  CHECK(first_line(dir / "ilr_fcco_enestedvr.csv") == "iter,inner_samples,outer_samples,error");
  c.seeds = 2;
  c.algorithms = std::vector<std::string>{"bsgd"};
  run_experiment(c, dir.string());
  CHECK(std::filesystem::exists(dir / "ilr_fcco_bsgd_s1.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("golden header: bias sweep and moments") {
  const auto dir = scratch_dir("cso_golden_bias");
  ExperimentConfig c;
  c.preset = "fig1b";
  c.reps = 200;
  c.m_list = std::vector<int>{1, 2};
  run_experiment(c, dir.string());
  CHECK(first_line(dir / "fig1b_order2.csv") == "m,bias,ci_halfwidth,variance,reps");
  c = {};
  c.preset = "moments_check";
  c.estimates = 500;
  run_experiment(c, dir.string());
  CHECK(first_line(dir / "moments_check.csv") == "law,m,k,empirical,predicted,rel_error");
  std::filesystem::remove_all(dir);
}

TEST_CASE("measure-bias rows") {
  const auto rows = measure_bias_table(2, "quad", {1, 4}, 1000, 0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "2");
  CHECK(rows[1][1] == "4");
  CHECK(rows[0].size() == csv_header::measure_bias.size());
  CHECK_THROWS_AS(query_by_name("cubic"), ParameterError);
}

TEST_CASE("unwritable output fails loudly") {
  CHECK_THROWS_AS(write_csv("/nonexistent-dir/x.csv", {"a"}, {}), IoError);
  CHECK_THROWS_AS(write_csv(std::filesystem::temp_directory_path() / "cso_w.csv", {"a", "b"}, {{"1"}}), IoError);
}

TEST_CASE("log-log slope") {
  CHECK(log_log_slope({1, 2, 4, 8}, {1.0, 0.25, 0.0625, 0.015625}) == doctest::Approx(-2.0));
}
