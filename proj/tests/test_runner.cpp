#include <doctest.h>

#include <cstdlib>

#include "cso/runner.hpp"

using namespace cso;

namespace {

RunConfig base_config(Algorithm a) {
  RunConfig c;
  c.algorithm = a;
  c.params.m = 2;
  c.params.B1 = 4;
  c.params.B2 = 2;
  c.params.p_out = 0.5;
  c.params.S1 = 4;
  c.params.S2 = 2;
  c.params.p_in = 0.5;
  c.params.gamma = 0.1;
  c.iterations = 30;
  c.eval_every = 10;
  c.metric = Metric::dist_to_ref;
  return c;
}

}  // namespace

TEST_CASE("runs are deterministic in the seed") {
  const auto p = make_invariant_lr(20, 3, 1.0, 1e-3, 0);
  for (Algorithm a : {Algorithm::bsgd, Algorithm::ebsgd, Algorithm::bspiderboost, Algorithm::ebspiderboost,
                      Algorithm::nestedvr, Algorithm::enestedvr}) {
    const RunTrace t1 = run(*p, base_config(a));
    const RunTrace t2 = run(*p, base_config(a));
    CHECK(t1.last_x == t2.last_x);
    CHECK(t1.rows.size() == 4);
    CHECK(t1.rows.front().iteration == 0);
    CHECK(t1.rows.back().iteration == 30);
    CHECK(t1.samples.inner > 0);
  }
}

TEST_CASE("the run stops once the inner budget is spent") {
  const auto p = make_invariant_lr(20, 3, 1.0, 1e-3, 0);
  RunConfig c = base_config(Algorithm::bsgd);
  c.params.B1 = 1;
  c.params.B2 = 1;
  c.iterations = 1000;
  c.inner_budget = 40;
  const RunTrace t = run(*p, c);
  CHECK(t.iterations_done == 10);
  CHECK(t.samples.inner == 40);
  CHECK(t.rows.back().iteration == 10);
}

TEST_CASE("divergence is reported") {
  const auto p = make_invariant_lr(20, 3, 1.0, 1e-3, 0);
  RunConfig c = base_config(Algorithm::bsgd);
  c.params.gamma = 1e12;
  const RunTrace t = run(*p, c);
  CHECK(t.diverged);
  CHECK(t.diagnostic.find("gamma") != std::string::npos);
}

TEST_CASE("finite-sum algorithms need a finite-sum problem") {
  MamlOptions o;
  o.net.layer_widths = {1, 4, 1};
  o.eval_tasks = 1;
  const SinusoidMaml p(o, 0);
  RunConfig c = base_config(Algorithm::nestedvr);
  c.metric = Metric::eval_loss;
  CHECK_THROWS_AS(run(p, c), ParameterError);
}

TEST_CASE("names round-trip") {
  for (Algorithm a : {Algorithm::bsgd, Algorithm::ebsgd, Algorithm::bspiderboost, Algorithm::ebspiderboost,
                      Algorithm::nestedvr, Algorithm::enestedvr})
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  CHECK(metric_from_name("eval_loss") == Metric::eval_loss);
  CHECK_THROWS_AS(algorithm_from_name("adam"), ParameterError);
  CHECK(is_extrapolated(Algorithm::enestedvr));
  CHECK_FALSE(is_extrapolated(Algorithm::nestedvr));
  CHECK(is_fcco_algorithm(Algorithm::nestedvr));
}

TEST_CASE("sweep results come back in job order") {
  const std::shared_ptr<const InvariantLogisticRegression> p = make_invariant_lr(20, 3, 1.0, 1e-3, 0);
  std::vector<SweepJob> jobs;
  for (std::uint64_t s = 0; s < 4; ++s) {
    RunConfig c = base_config(Algorithm::ebsgd);
    c.seed = s;
    jobs.push_back({p, c});
  }
  setenv("CSO_DEBIAS_THREADS", "2", 1);
  const auto traces = run_sweep(jobs);
  unsetenv("CSO_DEBIAS_THREADS");
  REQUIRE(traces.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(traces[i].last_x == run(*p, jobs[i].config).last_x);
}
