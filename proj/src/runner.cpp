#include "cso/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "cso/estimators_cso.hpp"
#include "cso/estimators_fcco.hpp"
#include "cso/neuralnet.hpp"

namespace cso {

namespace {

constexpr Algorithm kAlgorithms[] = {Algorithm::bsgd,          Algorithm::ebsgd,    Algorithm::bspiderboost,
                                     Algorithm::ebspiderboost, Algorithm::nestedvr, Algorithm::enestedvr};

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::bsgd: return "bsgd";
    case Algorithm::ebsgd: return "ebsgd";
    case Algorithm::bspiderboost: return "bspiderboost";
    case Algorithm::ebspiderboost: return "ebspiderboost";
    case Algorithm::nestedvr: return "nestedvr";
    case Algorithm::enestedvr: return "enestedvr";
  }
  return "";
}

Algorithm algorithm_from_name(const std::string& name) {
  for (Algorithm a : kAlgorithms)
    if (algorithm_name(a) == name) return a;
  throw ParameterError("unknown algorithm '" + name +
                       "' (bsgd, ebsgd, bspiderboost, ebspiderboost, nestedvr, enestedvr)");
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::dist_to_ref: return "dist_to_ref";
    case Metric::true_grad_norm: return "true_grad_norm";
    case Metric::eval_loss: return "eval_loss";
  }
  return "";
}

Metric metric_from_name(const std::string& name) {
  for (Metric m : {Metric::dist_to_ref, Metric::true_grad_norm, Metric::eval_loss})
    if (metric_name(m) == name) return m;
  throw ParameterError("unknown metric '" + name + "' (dist_to_ref, true_grad_norm, eval_loss)");
}

std::string optimizer_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ParameterError("unknown optimizer '" + name + "' (sgd, adam)");
}

bool is_fcco_algorithm(Algorithm a) { return a == Algorithm::nestedvr || a == Algorithm::enestedvr; }

bool is_extrapolated(Algorithm a) {
  return a == Algorithm::ebsgd || a == Algorithm::ebspiderboost || a == Algorithm::enestedvr;
}

Vector monte_carlo_gradient(const CsoProblem& problem, const Vector& x, const RngStream& rng, int outer, int inner) {
  require(outer >= 1 && inner >= 1, "Monte Carlo gradient needs positive sample counts");
  Vector acc = Vector::Zero(x.size());
  for (int k = 0; k < outer; ++k) acc += bsgd_gradient(problem, x, inner, rng.substream(static_cast<std::uint64_t>(k)));
  return acc / static_cast<double>(outer);
}

double true_grad_norm_sq(const CsoProblem& problem, const Vector& x, std::uint64_t seed, int outer, int inner) {
  if (const auto g = problem.true_grad(x)) return g->squaredNorm();
  return monte_carlo_gradient(problem, x, RngStream(seed, 0x96ad), outer, inner).squaredNorm();
}

double evaluate_metric(const CsoProblem& problem, Metric metric, const Vector& x) {
  switch (metric) {
    case Metric::dist_to_ref: {
      const auto ref = problem.reference_point();
      if (!ref) throw ParameterError("metric dist_to_ref needs a problem with a reference point");
      return (x - *ref).norm();
    }
    case Metric::true_grad_norm:
      return true_grad_norm_sq(problem, x);
    case Metric::eval_loss: {
      const auto loss = problem.eval_loss(x);
      if (!loss) throw ParameterError("metric eval_loss is not available for " + problem.name());
      return *loss;
    }
  }
  return 0.0;
}

RunTrace run(const CsoProblem& problem, const RunConfig& config) {
  require(config.iterations >= 0, "iterations must be >= 0");
  require(config.eval_every >= 1, "eval_every must be >= 1");
  require(config.params.gamma >= 0.0, "gamma must be >= 0");
  const auto* fcco = dynamic_cast<const FccoProblem*>(&problem);
  if (is_fcco_algorithm(config.algorithm) && !fcco)
    throw ParameterError(algorithm_name(config.algorithm) + " needs a finite-sum problem");

  const RngStream root(config.seed, 0xc0de);
  RngStream init_rng = root.substream(0);
  RngStream output_rng = root.substream(3);
  Vector x = config.x0 ? *config.x0 : problem.initial_point(init_rng);
  require(x.size() == problem.dim_x(), "initial point has the wrong dimension");

  const bool extrapolate = is_extrapolated(config.algorithm);
  CsoHyperParams cso_params;
  FccoHyperParams fcco_params;
  if (is_fcco_algorithm(config.algorithm)) {
    fcco_params = config.params.fcco();
    fcco_params.validate(fcco->n());
  } else {
    cso_params = config.params.cso();
    cso_params.validate();
  }
  if (!extrapolate) cso_params.order = fcco_params.order = ExtrapolationOrder::first;

  SpiderState spider;
  NestedVrState nested;
  AdamState adam = AdamState::zeros(x.size(), config.adam_lr);

  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  auto record = [&](long t) {
    TraceRow row;
    row.iteration = t;
    row.inner_samples = trace.samples.inner;
    row.outer_samples = trace.samples.outer;
    row.metric = evaluate_metric(problem, config.metric, x);
    row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back(row);
    if (!std::isfinite(row.metric) || std::abs(row.metric) > kDivergenceThreshold) {
      trace.diverged = true;
      trace.diagnostic = algorithm_name(config.algorithm) + " diverged at iteration " + std::to_string(t) +
                         ": metric " + std::to_string(row.metric) + " exceeds " +
                         std::to_string(kDivergenceThreshold) + "; lower gamma";
    }
  };

  record(0);
  trace.output_x = x;
  long t = 0;
  while (t < config.iterations && !trace.diverged) {
    if (config.inner_budget && trace.samples.inner >= *config.inner_budget) break;
    // Reservoir sample of the output iterate among x^0..x^t.
    if (t > 0 && output_rng.below(static_cast<std::uint64_t>(t + 1)) == 0) {
      trace.output_x = x;
      trace.output_index = t;
    }
    const RngStream step_rng = root.substream(1, static_cast<std::uint64_t>(t));
    Vector grad;
    switch (config.algorithm) {
      case Algorithm::bsgd:
      case Algorithm::ebsgd: {
        grad = Vector::Zero(x.size());
        for (int b = 0; b < cso_params.B1; ++b) {
          const RngStream s = step_rng.substream(1, static_cast<std::uint64_t>(b));
          grad += extrapolate ? ebsgd_gradient(problem, x, cso_params.m, cso_params.order, s, &trace.samples,
                                               cso_params.draw_mode)
                              : bsgd_gradient(problem, x, cso_params.m, s, &trace.samples);
        }
        grad /= static_cast<double>(cso_params.B1);
        break;
      }
      case Algorithm::bspiderboost:
      case Algorithm::ebspiderboost:
        grad = spider_step(spider, problem, x, cso_params, extrapolate, static_cast<std::uint64_t>(t), step_rng,
                           &trace.samples);
        break;
      case Algorithm::nestedvr:
        grad = nestedvr_step(nested, *fcco, x, fcco_params, t, step_rng, &trace.samples);
        break;
      case Algorithm::enestedvr:
        grad = enestedvr_step(nested, *fcco, x, fcco_params, t, step_rng, &trace.samples);
        break;
    }
    if (config.optimizer == Optimizer::adam) {
      if (config.adam_decay)
        adam.lr = config.adam_lr * (1.0 - static_cast<double>(t) / static_cast<double>(config.iterations));
      x += adam_step(adam, grad);
    } else {
      x -= config.params.gamma * grad;
    }
    ++t;
    if (t % config.eval_every == 0 || t == config.iterations) record(t);
  }
  if (trace.rows.back().iteration != t) record(t);
  trace.iterations_done = t;
  trace.last_x = x;
  return trace;
}

int sweep_thread_count(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  long cap = static_cast<long>(hw);
  if (const char* env = std::getenv("CSO_DEBIAS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) cap = std::min(cap, v);
  }
  return static_cast<int>(std::max<long>(1, std::min<long>(cap, static_cast<long>(jobs))));
}

std::vector<RunTrace> run_sweep(const std::vector<SweepJob>& jobs) {
  std::vector<RunTrace> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        results[k] = run(*jobs[k].problem, jobs[k].config);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads = sweep_thread_count(jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace cso
