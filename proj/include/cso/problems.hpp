#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cso/common.hpp"
#include "cso/neuralnet.hpp"
#include "cso/sampling.hpp"

namespace cso {

/// An outer draw xi or an inner draw eta. Finite-sum problems identify the
/// outer draw by `index`; `data` carries whatever payload the problem needs.
struct Draw {
  std::size_t index = 0;
  Vector data;
};
using OuterDraw = Draw;
using InnerDraw = Draw;

/// min_x E_xi[ f_xi( E_{eta|xi}[ g_eta(x; xi) ] ) ] + r(x).
///
/// g maps R^d to R^p, f_xi maps R^p to R. The optional regularizer r has an
/// exactly known gradient, which estimators add without bias.
class CsoProblem {
 public:
  virtual ~CsoProblem() = default;

  virtual std::string name() const = 0;
  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;

  virtual OuterDraw sample_xi(RngStream& rng) const = 0;
  virtual InnerDraw sample_eta(const OuterDraw& xi, RngStream& rng) const = 0;
  std::vector<InnerDraw> sample_eta_batch(const OuterDraw& xi, int m, RngStream& rng) const;

  virtual Vector g_value(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const = 0;
  /// p x d Jacobian of g at x.
  virtual Matrix g_jacobian(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const = 0;
  /// J(x)^T v without materializing J when a problem can avoid it.
  virtual Vector g_vjp(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const;

  virtual double f_value(const Vector& y, const OuterDraw& xi) const = 0;
  virtual Vector grad_f(const Vector& y, const OuterDraw& xi) const = 0;

  virtual double regularizer_value(const Vector& x) const;
  virtual Vector regularizer_grad(const Vector& x) const;

  /// Exact E_{eta|xi}[g_eta(x; xi)] when available.
  virtual std::optional<Vector> inner_mean(const Vector& x, const OuterDraw& xi) const;
  virtual std::optional<Matrix> inner_jacobian_mean(const Vector& x, const OuterDraw& xi) const;
  /// Exact gradient of the full objective when available.
  virtual std::optional<Vector> true_grad(const Vector& x) const;
  virtual std::optional<double> objective(const Vector& x) const;
  /// Problem-specific evaluation loss; defaults to the exact objective.
  virtual std::optional<double> eval_loss(const Vector& x) const;
  /// High-accuracy minimizer used by the distance-to-reference metric.
  virtual std::optional<Vector> reference_point() const;

  virtual Vector initial_point(RngStream& rng) const;
};

/// Finite-sum variant: xi is a uniformly weighted index i in {0..n-1}.
class FccoProblem : public CsoProblem {
 public:
  virtual std::size_t n() const = 0;
  virtual OuterDraw outer_at(std::size_t i) const = 0;

  OuterDraw sample_xi(RngStream& rng) const override;
  /// (1/n) sum_i Jbar_i^T grad f_i(ybar_i) + grad r, from the exact inner oracles.
  std::optional<Vector> true_grad(const Vector& x) const override;
  std::optional<double> objective(const Vector& x) const override;
};

/// FCCO problem whose inner map is linear in x: g_eta(x; i) = phi(eta, i)^T x
/// (p = 1), with a smooth scalar outer loss f_i. Covers both the invariant
/// logistic regression and the instrumental-variable regression.
class LinearCompositionProblem : public FccoProblem {
 public:
  int dim_y() const override { return 1; }

  virtual Vector features(const InnerDraw& eta, const OuterDraw& xi) const = 0;
  /// Row i holds E[phi(eta, i)].
  virtual const Matrix& mean_feature_matrix() const = 0;
  Vector mean_features(std::size_t i) const;
  virtual double loss(double y, std::size_t i) const = 0;
  virtual double loss_d1(double y, std::size_t i) const = 0;
  virtual double loss_d2(double y, std::size_t i) const = 0;
  virtual double l2_coeff() const { return 0.0; }

  Vector g_value(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const override;
  Matrix g_jacobian(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const override;
  Vector g_vjp(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const override;
  double f_value(const Vector& y, const OuterDraw& xi) const override;
  Vector grad_f(const Vector& y, const OuterDraw& xi) const override;
  double regularizer_value(const Vector& x) const override;
  Vector regularizer_grad(const Vector& x) const override;
  std::optional<Vector> inner_mean(const Vector& x, const OuterDraw& xi) const override;
  std::optional<Matrix> inner_jacobian_mean(const Vector& x, const OuterDraw& xi) const override;
  std::optional<Vector> true_grad(const Vector& x) const override;
  std::optional<double> objective(const Vector& x) const override;
  std::optional<Vector> reference_point() const override;

  /// Damped Newton on the exact objective, to gradient norm `tol`.
  Vector solve_reference(double tol = 1e-12, int max_iter = 200) const;

 private:
  mutable std::once_flag reference_once_;
  mutable Vector reference_;
};

/// Invariant logistic regression: f_i(y) = log(1 + exp(-b_i y)),
/// g_eta(x) = eta^T x with eta ~ N(a_i, noise_variance I).
class InvariantLogisticRegression final : public LinearCompositionProblem {
 public:
  InvariantLogisticRegression(Matrix a, Vector b, double noise_variance, double l2_coeff);

  std::string name() const override { return "invariant_lr"; }
  int dim_x() const override { return static_cast<int>(a_.cols()); }
  std::size_t n() const override { return static_cast<std::size_t>(a_.rows()); }
  OuterDraw outer_at(std::size_t i) const override;
  InnerDraw sample_eta(const OuterDraw& xi, RngStream& rng) const override;

  Vector features(const InnerDraw& eta, const OuterDraw& xi) const override;
  const Matrix& mean_feature_matrix() const override { return a_; }
  double loss(double y, std::size_t i) const override;
  double loss_d1(double y, std::size_t i) const override;
  double loss_d2(double y, std::size_t i) const override;
  double l2_coeff() const override { return l2_coeff_; }

  const Matrix& samples() const { return a_; }
  const Vector& labels() const { return b_; }
  double noise_variance() const { return noise_variance_; }

 private:
  Matrix a_;
  Vector b_;
  double noise_variance_;
  double l2_coeff_;
};

/// Instrumental-variable regression with log-cosh loss. The regressor sees
/// the lifted input (X, 1); X | Z is redrawn from the structural model
/// X = z1/2 + e/2 + gamma with fresh e ~ N(0,1) and gamma ~ Exp(rate 10).
class IvRegression final : public LinearCompositionProblem {
 public:
  static constexpr double kGammaRate = 10.0;

  IvRegression(Matrix z, Vector y);

  std::string name() const override { return "iv_regression"; }
  int dim_x() const override { return 2; }
  std::size_t n() const override { return static_cast<std::size_t>(z_.rows()); }
  OuterDraw outer_at(std::size_t i) const override;
  InnerDraw sample_eta(const OuterDraw& xi, RngStream& rng) const override;

  Vector features(const InnerDraw& eta, const OuterDraw& xi) const override;
  const Matrix& mean_feature_matrix() const override { return mean_features_; }
  double loss(double y, std::size_t i) const override;
  double loss_d1(double y, std::size_t i) const override;
  double loss_d2(double y, std::size_t i) const override;

  /// E[X | Z = z] = z1/2 + 1/rate.
  static double conditional_mean(double z1) { return 0.5 * z1 + 1.0 / kGammaRate; }
  const Matrix& instruments() const { return z_; }
  const Vector& outcomes() const { return y_; }

 private:
  Matrix z_;
  Vector y_;
  Matrix mean_features_;
};

enum class JacobianMode { first_order, exact };

struct MamlOptions {
  double alpha = 0.01;
  NetSpec net{};
  int support_size = 10;
  int query_size = 10;
  JacobianMode jacobian_mode = JacobianMode::first_order;
  int eval_tasks = 200;
  int eval_points = 50;
  /// Inner steps of size alpha taken before measuring the evaluation MSE.
  int eval_adaptation_steps = 1;
  /// Step size of those inner steps; 0 means alpha.
  double eval_step_size = 0.0;
};

/// First-order MAML on sine-wave regression. xi = (A, phase, query inputs),
/// eta = support inputs; g_eta(x) = x - alpha grad l(x; support),
/// f_xi(x') = l(x'; query).
class SinusoidMaml final : public CsoProblem {
 public:
  SinusoidMaml(MamlOptions options, std::uint64_t seed);

  std::string name() const override { return "sinusoid_maml"; }
  int dim_x() const override { return static_cast<int>(options_.net.parameter_count()); }
  int dim_y() const override { return dim_x(); }

  OuterDraw sample_xi(RngStream& rng) const override;
  InnerDraw sample_eta(const OuterDraw& xi, RngStream& rng) const override;
  Vector g_value(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const override;
  Matrix g_jacobian(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const override;
  Vector g_vjp(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const override;
  double f_value(const Vector& y, const OuterDraw& xi) const override;
  Vector grad_f(const Vector& y, const OuterDraw& xi) const override;

  /// Mean post-adaptation MSE over a fixed set of held-out tasks.
  std::optional<double> eval_loss(const Vector& x) const override;
  Vector initial_point(RngStream& rng) const override;

  const MamlOptions& options() const { return options_; }
  static SineData task_data(const OuterDraw& xi, std::span<const double> inputs);

 private:
  Vector hessian_vector(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const;

  MamlOptions options_;
  struct EvalTask {
    OuterDraw task;
    InnerDraw support;
    std::vector<double> points;
  };
  std::vector<EvalTask> eval_set_;
};

std::shared_ptr<InvariantLogisticRegression> make_invariant_lr(std::size_t n, int d, double noise_variance,
                                                               double l2_coeff, std::uint64_t seed);
std::shared_ptr<IvRegression> make_iv_regression(std::size_t n, std::uint64_t seed);
std::shared_ptr<SinusoidMaml> make_sinusoid_maml(double alpha, const NetSpec& net, std::uint64_t seed);

/// Dataset audit files: one row per (a_i, b_i) or (Z_i, Y_i) record.
void dump_dataset_csv(const InvariantLogisticRegression& problem, const std::string& path);
void dump_dataset_csv(const IvRegression& problem, const std::string& path);
std::shared_ptr<InvariantLogisticRegression> load_invariant_lr_csv(const std::string& path, double noise_variance,
                                                                   double l2_coeff);
std::shared_ptr<IvRegression> load_iv_regression_csv(const std::string& path);

/// Derivative and moment constants. All values are estimates.
struct SmoothnessConstants {
  std::array<double, 4> a{};  // a_l = sup |d^l grad f|, l = 1..4
  double sigma2 = 0.0, sigma3 = 0.0, sigma4 = 0.0;
  double C_f = 0.0, C_g = 0.0, L_f = 0.0, L_g = 0.0;
  double sigma_g = 0.0, zeta_g = 0.0;
  double L_F = 0.0, C_F = 0.0, Ltilde_F = 0.0;

  /// L_F = L_g C_f + C_g^2 L_f, C_F = C_f C_g, Ltilde_F = zeta_g C_f + sigma_g C_g L_f.
  void derive();
};

struct ConstantsOptions {
  int inner_draws = 2000;
  double fd_step = 1e-2;
};

SmoothnessConstants compute_constants(const CsoProblem& problem, int probes, RngStream& rng,
                                      const ConstantsOptions& options = {});

}  // namespace cso
