#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cso/hyperparams.hpp"
#include "cso/problems.hpp"

namespace cso {

enum class Algorithm { bsgd, ebsgd, bspiderboost, ebspiderboost, nestedvr, enestedvr };
enum class Metric { dist_to_ref, true_grad_norm, eval_loss };
enum class Optimizer { sgd, adam };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);
std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);
std::string optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);
bool is_fcco_algorithm(Algorithm a);
bool is_extrapolated(Algorithm a);

struct RunConfig {
  Algorithm algorithm = Algorithm::bsgd;
  /// BSGD and E-BSGD average B1 per-xi estimates per step.
  HyperParams params;
  long iterations = 100;
  long eval_every = 1;
  std::uint64_t seed = 0;
  Metric metric = Metric::true_grad_norm;
  /// Stop once this many inner samples have been used.
  std::optional<std::uint64_t> inner_budget;
  Optimizer optimizer = Optimizer::sgd;
  double adam_lr = 1e-3;
  /// Decay the Adam rate linearly to zero over the run.
  bool adam_decay = false;
  std::optional<Vector> x0;
};

struct TraceRow {
  long iteration = 0;
  std::uint64_t inner_samples = 0;
  std::uint64_t outer_samples = 0;
  double metric = 0.0;
  double wallclock = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  Vector last_x;
  /// x^s, drawn uniformly from x^0..x^{T-1}.
  Vector output_x;
  long output_index = 0;
  long iterations_done = 0;
  bool diverged = false;
  std::string diagnostic;
  SampleCounter samples;

  double final_metric() const { return rows.empty() ? 0.0 : rows.back().metric; }
};

inline constexpr double kDivergenceThreshold = 1e8;

/// x^{t+1} = x^t - gamma G^{t+1} (or an Adam step on G^{t+1}) for T steps.
RunTrace run(const CsoProblem& problem, const RunConfig& config);

/// ||grad F(x)||^2 from the exact oracle, or a Monte Carlo estimate with
/// `outer` tasks and `inner` draws per inner mean when no oracle exists.
double true_grad_norm_sq(const CsoProblem& problem, const Vector& x, std::uint64_t seed = 0, int outer = 2000,
                         int inner = 200);
Vector monte_carlo_gradient(const CsoProblem& problem, const Vector& x, const RngStream& rng, int outer, int inner);

double evaluate_metric(const CsoProblem& problem, Metric metric, const Vector& x);

struct SweepJob {
  std::shared_ptr<const CsoProblem> problem;
  RunConfig config;
};

/// Runs independent jobs on up to min(hardware threads, CSO_DEBIAS_THREADS)
/// workers. Results are returned in job order.
std::vector<RunTrace> run_sweep(const std::vector<SweepJob>& jobs);
int sweep_thread_count(std::size_t jobs);

}  // namespace cso
