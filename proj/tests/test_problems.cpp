#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cso/problems.hpp"

using namespace cso;

namespace {

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

}  // namespace

TEST_CASE("invariant LR data and inner draws") {
  const auto p = make_invariant_lr(20, 3, 4.0, 1e-2, 1);
  CHECK(p->n() == 20);
  CHECK(p->dim_x() == 3);
  for (Eigen::Index i = 0; i < p->labels().size(); ++i) CHECK(std::abs(p->labels()[i]) == 1.0);
  RngStream rng(2);
  const OuterDraw xi = p->outer_at(4);
  Vector acc = Vector::Zero(3);
  for (int k = 0; k < 20000; ++k) acc += p->sample_eta(xi, rng).data;
  const Vector mean = acc / 20000.0;
  CHECK((mean - p->samples().row(4).transpose()).norm() < 0.06);
}

TEST_CASE("noise-free invariant LR gradient is the per-sample logistic gradient") {
  const auto p = make_invariant_lr(5, 4, 0.0, 0.1, 3);
  const Vector x = Vector::LinSpaced(4, -0.5, 0.7);
  RngStream rng(0);
  const OuterDraw xi = p->outer_at(2);
  const InnerDraw eta = p->sample_eta(xi, rng);
  const Vector a = p->samples().row(2).transpose();
  const double b = p->labels()[2];
  const Vector expected = -b / (1.0 + std::exp(b * a.dot(x))) * a + 0.1 * x;
  const Vector got = p->g_vjp(x, eta, xi, p->grad_f(p->g_value(x, eta, xi), xi)) + p->regularizer_grad(x);
  CHECK((got - expected).norm() < 1e-14);
}

TEST_CASE("reference point is stationary") {
  const auto p = make_invariant_lr(200, 5, 1.0, 1e-3, 4);
  const Vector ref = *p->reference_point();
  CHECK(p->true_grad(ref)->norm() < 1e-9);
  const auto iv = make_iv_regression(300, 1);
  CHECK(iv->true_grad(*iv->reference_point())->norm() < 1e-9);
}

TEST_CASE("true gradient matches differences of the objective") {
  const auto p = make_iv_regression(50, 2);
  Vector x(2);
  x << 0.8, -0.2;
  const Vector g = *p->true_grad(x);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    CHECK(g[k] == doctest::Approx((*p->objective(xp) - *p->objective(xm)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("IV inner draws have the conditional mean z1/2 + 1/10") {
  const auto p = make_iv_regression(10, 5);
  const OuterDraw xi = p->outer_at(3);
  RngStream rng(1);
  double acc = 0.0;
  for (int k = 0; k < 100000; ++k) acc += p->sample_eta(xi, rng).data[0];
  CHECK(acc / 100000 == doctest::Approx(0.5 * xi.data[0] + 0.1).epsilon(0.01).scale(1.0));
}

TEST_CASE("log-cosh loss and derivatives") {
  const auto p = make_iv_regression(3, 0);
  const double yi = p->outcomes()[1];
  for (double r : {-30.0, -1.0, 0.0, 0.3, 25.0}) {
    CHECK(p->loss(yi + r, 1) == doctest::Approx(std::log(std::cosh(r))).epsilon(1e-12).scale(1.0));
    const double h = 1e-6;
    CHECK(p->loss_d1(yi + r, 1) == doctest::Approx((p->loss(yi + r + h, 1) - p->loss(yi + r - h, 1)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("g_jacobian matches finite differences") {
  RngStream rng(11);
  const auto ilr = make_invariant_lr(10, 4, 2.0, 0.0, 0);
  const auto iv = make_iv_regression(10, 0);
  for (const CsoProblem* p : {static_cast<const CsoProblem*>(ilr.get()), static_cast<const CsoProblem*>(iv.get())}) {
    const OuterDraw xi = p->sample_xi(rng);
    const InnerDraw eta = p->sample_eta(xi, rng);
    Vector x(p->dim_x());
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.normal();
    const Matrix j = p->g_jacobian(x, eta, xi);
    const Matrix fd = fd_jacobian(*p, x, eta, xi, 1e-6);
    CHECK((j - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("MAML inner map is one gradient step on the support set") {
  MamlOptions o;
  o.net.layer_widths = {1, 6, 1};
  o.eval_tasks = 2;
  const SinusoidMaml p(o, 0);
  RngStream rng(5);
  const Vector x = p.initial_point(rng);
  const OuterDraw xi = p.sample_xi(rng);
  const InnerDraw eta = p.sample_eta(xi, rng);
  CHECK(eta.data.size() == 10);
  const std::vector<double> support(eta.data.data(), eta.data.data() + eta.data.size());
  const LossGrad lg = loss_and_grad(o.net, x, SinusoidMaml::task_data(xi, support));
  CHECK((p.g_value(x, eta, xi) - (x - 0.01 * lg.grad)).norm() < 1e-15);
  CHECK(p.g_jacobian(x, eta, xi).isIdentity());
}

TEST_CASE("exact MAML Jacobian matches finite differences") {
  MamlOptions o;
  o.net.layer_widths = {1, 5, 1};
  o.alpha = 0.3;
  o.eval_tasks = 1;
  o.jacobian_mode = JacobianMode::exact;
  const SinusoidMaml p(o, 0);
  RngStream rng(8);
  const Vector x = p.initial_point(rng);
  const OuterDraw xi = p.sample_xi(rng);
  const InnerDraw eta = p.sample_eta(xi, rng);
  const Matrix j = p.g_jacobian(x, eta, xi);
  const Matrix fd = fd_jacobian(p, x, eta, xi, 1e-5);
  CHECK((j - fd).norm() <= 1e-5 * fd.norm());
}

TEST_CASE("dataset files round-trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto ilr = make_invariant_lr(7, 3, 2.0, 0.0, 9);
  const std::string f1 = (dir / "cso_test_ilr.csv").string();
  dump_dataset_csv(*ilr, f1);
  const auto back = load_invariant_lr_csv(f1, 2.0, 0.0);
  CHECK(back->samples() == ilr->samples());
  CHECK(back->labels() == ilr->labels());
  const auto iv = make_iv_regression(6, 9);
  const std::string f2 = (dir / "cso_test_iv.csv").string();
  dump_dataset_csv(*iv, f2);
  const auto back2 = load_iv_regression_csv(f2);
  CHECK(back2->instruments() == iv->instruments());
  CHECK(back2->outcomes() == iv->outcomes());
  std::remove(f1.c_str());
  std::remove(f2.c_str());
}

TEST_CASE("constants of the noise-free linear model") {
  const auto p = make_invariant_lr(30, 3, 0.0, 0.0, 2);
  RngStream rng(1);
  const SmoothnessConstants c = compute_constants(*p, 10, rng);
  CHECK(c.sigma2 == doctest::Approx(0.0));
  CHECK(c.zeta_g == doctest::Approx(0.0));
  CHECK(c.a[0] <= 0.25 + 1e-6);
  CHECK(c.L_F == doctest::Approx(c.L_g * c.C_f + c.C_g * c.C_g * c.L_f));
}
