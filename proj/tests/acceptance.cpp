#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cso/estimators_cso.hpp"
#include "cso/hyperparams.hpp"
#include "cso/neuralnet.hpp"
#include "cso/presets.hpp"
#include "cso/runner.hpp"

using namespace cso;
using nlohmann::json;

namespace {

std::string g_out;
int g_unexpected = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool known_limitation = false;
};

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("criterion %2d: %s  %s  [%s] (%.1fs)%s\n", id, o.pass ? "PASS" : "FAIL", title.c_str(),
              o.detail.c_str(), secs, o.known_limitation ? " known limitation" : "");
  std::fflush(stdout);
  if (!o.pass && !o.known_limitation) ++g_unexpected;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

json run_preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  return run_experiment(c, (std::filesystem::path(g_out) / name).string()).summary;
}

Outcome moments() {
  const json s = run_preset("moments_check");
  bool ok = true;
  double worst2 = 0, worst34 = 0;
  for (const auto& r : s["results"]["rows"]) {
    const double e = r["rel_error"];
    if (r["k"] == 2) {
      worst2 = std::max(worst2, e);
      ok = ok && e < 0.05;
    } else {
      worst34 = std::max(worst34, e);
      ok = ok && e < 0.10;
    }
  }
  return {ok, fmt("worst rel error k=2 %.4f, k=3,4 %.4f", worst2, worst34)};
}

Outcome fig1a() {
  const json s = run_preset("fig1a")["results"]["quad"];
  const double e1 = s["order1"]["final_abs_error"];
  const double e2 = s["order2"]["final_abs_error"], c2 = s["order2"]["ci_halfwidth"];
  const double e3 = s["order3"]["final_abs_error"], c3 = s["order3"]["ci_halfwidth"];
  // ci_halfwidth is the 95% interval; two unbiased orders are compared
  // against a 3 sigma band so that chance alone fails well under 1% of runs.
  const double widen = 3.0 / 1.96;
  const bool ok = std::abs(e1 - 50.0) <= 1.0 && e2 <= widen * c2 && e3 <= widen * c3;
  return {ok, fmt("order1 %.3f (target 50), order2 %.3f (3 sigma %.3f)", e1, e2, widen * c2) +
                  fmt(", order3 %.3f (3 sigma %.3f)", e3, widen * c3)};
}

Outcome fig1b() {
  const json s = run_preset("fig1b")["results"];
  const double s1 = s["order1"]["slope"], s2 = s["order2"]["slope"], s3 = s["order3"]["slope"];
  const double b1 = s["order1"]["points"][0]["bias"];
  const bool first_two = std::abs(s1 + 1) <= 0.35 && std::abs(s2 + 2) <= 0.35 && std::abs(b1 - 176.0 / 81.0) <= 0.02 * 176.0 / 81.0;
  const bool third = std::abs(s3 + 3) <= 0.35;
  Outcome o{first_two && third, fmt("slopes %.3f %.3f %.3f", s1, s2, s3) + fmt(", order1 bias at m=1 %.4f (target %.4f)", b1, 176.0 / 81.0)};
  // The third-order operator is exactly unbiased for a quartic, so its bias
  // is zero at every m and the fitted slope is noise.
  if (first_two && !third) {
    const double h = s["order3"]["points"][0]["ci_halfwidth"];
    const double b = s["order3"]["points"][0]["bias"];
    o.detail += fmt("; order3 bias at m=1 %.2e within ci %.2e", b, h);
    o.known_limitation = std::abs(b) <= h;
  }
  return o;
}

Outcome variance_bound() {
  std::string detail;
  bool ok = true;
  const std::size_t reps = 400000;
  const std::vector<std::pair<std::string, Distribution>> cases{{"quad", Distribution::normal(10.0, 100.0)},
                                                                {"quartic", Distribution::ramp()}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& [fn, law] = cases[i];
    const RngStream root(11, i);
    const double v1 =
        measure_bias_and_variance(ExtrapolationOrder::first, query_by_name(fn), 0.0, law, 1, reps, root.substream(1))
            .variance_est;
    const double v2 =
        measure_bias_and_variance(ExtrapolationOrder::second, query_by_name(fn), 0.0, law, 1, reps, root.substream(2))
            .variance_est;
    ok = ok && v2 <= 14.0 * v1 * 1.1;
    detail += fn + fmt(": Var(L2)/Var(q) = %.3f; ", v2 / v1);
  }
  return {ok, detail + "bound 14"};
}

Outcome fig5() {
  const json s = run_preset("fig5")["results"];
  bool ok = true;
  std::string detail;
  for (const std::string fn : {"relu", "triwave"}) {
    const double e1 = s[fn]["order1"]["final_abs_error"];
    const double e2 = s[fn]["order2"]["final_abs_error"];
    const double e3 = s[fn]["order3"]["final_abs_error"];
    ok = ok && e2 < e1 && e3 < e1;
    detail += fn + fmt(" %.4f %.4f %.4f; ", e1, e2, e3);
  }
  return {ok, detail};
}

Outcome oracle_equivalence() {
  const auto p = make_invariant_lr(30, 5, 0.0, 0.1, 6);
  RngStream rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(5);
    for (int k = 0; k < 5; ++k) x[k] = rng.normal();
    const std::size_t i = rng.below(p->n());
    const OuterDraw xi = p->outer_at(i);
    const Vector a = p->samples().row(static_cast<Eigen::Index>(i)).transpose();
    const double b = p->labels()[static_cast<Eigen::Index>(i)];
    const Vector exact = -b / (1.0 + std::exp(b * a.dot(x))) * a + 0.1 * x;
    for (int m : {1, 3}) {
      const Vector g1 = bsgd_gradient_at(*p, x, xi, m, rng.substream(1, trial));
      const Vector g2 = ebsgd_gradient_at(*p, x, xi, m, ExtrapolationOrder::second, rng.substream(2, trial));
      const Vector g3 = ebsgd_gradient_at(*p, x, xi, m, ExtrapolationOrder::third, rng.substream(3, trial));
      for (const Vector* g : {&g1, &g2, &g3}) worst = std::max(worst, (*g - exact).norm() / std::max(1.0, exact.norm()));
    }
  }

  // Full-batch gradient descent written out directly.
  const double gamma = 0.5;
  const long steps = 25;
  bool identical = true;
  for (int m : {1, 2}) {
    Vector x = Vector::Zero(5);
    RngStream noise(0);
    for (long t = 0; t < steps; ++t) {
      Vector acc = Vector::Zero(5);
      for (std::size_t i = 0; i < p->n(); ++i) {
        const OuterDraw xi = p->outer_at(i);
        const InnerDraw eta = p->sample_eta(xi, noise);
        const Matrix j = p->g_jacobian(x, eta, xi);
        acc += j.transpose() * p->grad_f(p->g_value(x, eta, xi), xi);
      }
      const Vector grad = acc / static_cast<double>(p->n()) + p->regularizer_grad(x);
      x -= gamma * grad;
    }
    RunConfig c;
    c.algorithm = Algorithm::nestedvr;
    c.params.gamma = gamma;
    c.params.B1 = c.params.B2 = static_cast<std::int64_t>(p->n());
    c.params.S1 = c.params.S2 = m;
    c.params.p_in = c.params.p_out = 1.0;
    c.iterations = steps;
    c.eval_every = steps;
    c.metric = Metric::dist_to_ref;
    c.x0 = Vector::Zero(5);
    const RunTrace tr = run(*p, c);
    identical = identical && tr.last_x == x;
  }
  return {worst <= 1e-12 && identical,
          fmt("max rel deviation %.2e; full-batch iterates bit-identical: ", worst) + (identical ? "yes" : "no")};
}

struct PairCount {
  double median_e, median_b;
  int wins;
};

PairCount compare(const json& algs, const std::string& e, const std::string& b) {
  const auto& fe = algs[e]["final"];
  const auto& fb = algs[b]["final"];
  int wins = 0;
  for (std::size_t k = 0; k < fe.size(); ++k) wins += fe[k].get<double>() < fb[k].get<double>();
  return {algs[e]["median"], algs[b]["median"], wins};
}

Outcome paired_ordering(const std::vector<std::string>& presets,
                        const std::vector<std::pair<std::string, std::string>>& pairs, bool need_median) {
  bool ok = true;
  std::string detail;
  for (const auto& preset : presets) {
    const json algs = run_preset(preset)["results"]["algorithms"];
    for (const auto& [e, b] : pairs) {
      if (!algs.contains(e)) continue;
      const PairCount pc = compare(algs, e, b);
      const int seeds = static_cast<int>(algs[e]["final"].size());
      ok = ok && pc.wins >= seeds - 1 && (!need_median || pc.median_e < pc.median_b);
      detail += preset + " " + e + fmt(" %.4g vs %.4g", pc.median_e, pc.median_b) + " wins " +
                std::to_string(pc.wins) + "/" + std::to_string(seeds) + "; ";
    }
  }
  return {ok, detail};
}

Outcome fig2b() {
  const json algs = run_preset("ilr_fcco")["results"]["algorithms"];
  const auto& best = algs["enestedvr"]["final"];
  int wins = 0;
  std::string detail;
  for (std::size_t k = 0; k < best.size(); ++k) {
    bool all = true;
    for (const auto& [name, entry] : algs.items())
      if (name != "enestedvr") all = all && best[k].get<double>() <= entry["final"][k].get<double>();
    wins += all;
  }
  for (const auto& [name, entry] : algs.items()) detail += name + fmt(" %.4g; ", entry["median"].get<double>());
  return {wins >= static_cast<int>(best.size()) - 1, detail + "E-NestedVR best in " + std::to_string(wins) + "/" +
                                                         std::to_string(best.size()) + " seeds"};
}

Outcome maml() {
  const json algs = run_preset("maml_sine")["results"]["algorithms"];
  const double i1 = algs["bsgd"]["initial"][0], i2 = algs["ebsgd"]["initial"][0];
  const double f1 = algs["bsgd"]["final"][0], f2 = algs["ebsgd"]["final"][0];
  const double rel = std::abs(f1 - f2) / std::min(f1, f2);
  const bool ok = i1 > 3 && i2 > 3 && f1 < 1 && f2 < 1 && rel < 0.25;
  return {ok, fmt("bsgd %.3f -> %.3f, ", i1, f1) + fmt("ebsgd %.3f -> %.3f, relative gap %.3f", i2, f2, rel)};
}

Outcome suggester() {
  SmoothnessConstants c;
  c.C_f = 2.0;
  c.C_g = 1.5;
  c.L_f = 0.5;
  c.L_g = 3.0;
  c.sigma_g = 0.7;
  c.zeta_g = 0.4;
  c.a = {0.25, 1.0, 2.0, 1.0};
  c.sigma2 = 0.5;
  c.sigma3 = 0.2;
  c.sigma4 = 0.6;
  c.derive();
  const auto h1 = suggest_hyperparams(Theorem::ebsgd, c, 0.01);
  const bool ok1 = h1.m == 2 && std::abs(h1.gamma - 1.0 / 14.25) < 1e-15;

  SmoothnessConstants ones;
  ones.C_f = ones.C_g = ones.L_f = ones.L_g = ones.sigma_g = ones.zeta_g = 1.0;
  ones.derive();
  SuggestOptions o;
  o.ce_cg = 1.0;
  const auto h2 = suggest_hyperparams(Theorem::ebsb, ones, 0.1, std::nullopt, o);
  const bool ok2 = h2.m == 4 && h2.B1 == 200 && h2.B2 == 15 && std::abs(h2.gamma - 1.0 / 26.0) < 1e-15;

  const auto h3 = suggest_envr(c, 0.1, 4);
  const bool ok3 = h3.B1 == 4 && h3.S1 == 176 && h3.S2 == 14;
  return {ok1 && ok2 && ok3, std::string("E-BSGD ") + (ok1 ? "ok" : "mismatch") + ", E-BSpiderBoost " +
                                 (ok2 ? "ok" : "mismatch") + ", E-NestedVR " + (ok3 ? "ok" : "mismatch")};
}

Matrix fd_jacobian(const CsoProblem& p, const Vector& x, const InnerDraw& eta, const OuterDraw& xi, double h) {
  const Vector g0 = p.g_value(x, eta, xi);
  Matrix j(g0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    j.col(k) = (p.g_value(xp, eta, xi) - p.g_value(xm, eta, xi)) / (2 * h);
  }
  return j;
}

Outcome gradients() {
  RngStream rng(21);
  double worst = 0.0;

  NetSpec spec;
  spec.layer_widths = {1, 8, 8, 1};
  const std::vector<double> inputs{-3.0, -1.2, 0.4, 2.5};
  for (int probe = 0; probe < 3; ++probe) {
    const Vector w = init_weights(spec, rng);
    const SineData data{1.0 + rng.uniform(), rng.uniform() * 3.0, inputs};
    const Vector g = loss_and_grad(spec, w, data).grad;
    Vector fd(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      Vector wp = w, wm = w;
      wp[k] += 1e-6;
      wm[k] -= 1e-6;
      fd[k] = (loss_only(spec, wp, data) - loss_only(spec, wm, data)) / 2e-6;
    }
    worst = std::max(worst, (g - fd).norm() / fd.norm());
  }

  MamlOptions mo;
  mo.net.layer_widths = {1, 6, 1};
  mo.alpha = 0.3;
  mo.eval_tasks = 1;
  mo.jacobian_mode = JacobianMode::exact;
  const auto ilr = make_invariant_lr(10, 4, 2.0, 1e-3, 0);
  const auto iv = make_iv_regression(10, 0);
  const SinusoidMaml maml(mo, 0);
  for (const CsoProblem* p : {static_cast<const CsoProblem*>(ilr.get()), static_cast<const CsoProblem*>(iv.get()),
                              static_cast<const CsoProblem*>(&maml)}) {
    for (int probe = 0; probe < 3; ++probe) {
      const OuterDraw xi = p->sample_xi(rng);
      const InnerDraw eta = p->sample_eta(xi, rng);
      Vector x = p->initial_point(rng);
      for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += 0.5 * rng.normal();
      const Matrix fd = fd_jacobian(*p, x, eta, xi, 1e-5);
      worst = std::max(worst, (p->g_jacobian(x, eta, xi) - fd).norm() / std::max(1e-12, fd.norm()));
    }
  }
  return {worst <= 1e-5, fmt("max relative error %.2e", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  g_out = argc > 1 ? argv[1] : "acceptance_out";
  std::filesystem::create_directories(g_out);
  report(1, "moments of sample averages", moments);
  report(2, "error curves for s^2/2", fig1a);
  report(3, "bias order slopes for s^4", fig1b);
  report(4, "second-order variance bound", variance_bound);
  report(5, "ReLU and perturbed quadratic", fig5);
  report(6, "noise-free estimator oracles", oracle_equivalence);
  report(7, "invariant LR, CSO ordering",
         [] { return paired_ordering({"ilr_cso"}, {{"ebsgd", "bsgd"}, {"ebspiderboost", "bspiderboost"}, {"enestedvr", "nestedvr"}}, true); });
  report(8, "invariant LR, finite-sum ordering", fig2b);
  report(9, "IV regression ordering", [] {
    return paired_ordering({"iv_cso", "iv_fcco"},
                           {{"ebsgd", "bsgd"}, {"ebspiderboost", "bspiderboost"}, {"enestedvr", "nestedvr"}}, false);
  });
  report(10, "sinusoid meta-learning", maml);
  report(11, "hyperparameter suggestions", suggester);
  report(12, "finite-difference gradients", gradients);
  std::printf("%s\n", g_unexpected == 0 ? "acceptance: all criteria met or known limitations" : "acceptance: FAILED");
  return g_unexpected == 0 ? 0 : 1;
}
