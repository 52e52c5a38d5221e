#include "cso/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace cso {

// ---------------------------------------------------------------- CsoProblem

std::vector<InnerDraw> CsoProblem::sample_eta_batch(const OuterDraw& xi, int m, RngStream& rng) const {
  require(m >= 1, "inner batch m must be >= 1");
  std::vector<InnerDraw> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) out.push_back(sample_eta(xi, rng));
  return out;
}

Vector CsoProblem::g_vjp(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const {
  return g_jacobian(x, eta, xi).transpose() * v;
}

double CsoProblem::regularizer_value(const Vector&) const { return 0.0; }
Vector CsoProblem::regularizer_grad(const Vector& x) const { return Vector::Zero(x.size()); }
std::optional<Vector> CsoProblem::inner_mean(const Vector&, const OuterDraw&) const { return std::nullopt; }
std::optional<Matrix> CsoProblem::inner_jacobian_mean(const Vector&, const OuterDraw&) const { return std::nullopt; }
std::optional<Vector> CsoProblem::true_grad(const Vector&) const { return std::nullopt; }
std::optional<double> CsoProblem::objective(const Vector&) const { return std::nullopt; }
std::optional<double> CsoProblem::eval_loss(const Vector& x) const { return objective(x); }
std::optional<Vector> CsoProblem::reference_point() const { return std::nullopt; }
Vector CsoProblem::initial_point(RngStream&) const { return Vector::Zero(dim_x()); }

// ---------------------------------------------------------------- FccoProblem

OuterDraw FccoProblem::sample_xi(RngStream& rng) const { return outer_at(static_cast<std::size_t>(rng.below(n()))); }

std::optional<Vector> FccoProblem::true_grad(const Vector& x) const {
  Vector acc = Vector::Zero(dim_x());
  for (std::size_t i = 0; i < n(); ++i) {
    const OuterDraw xi = outer_at(i);
    const auto y = inner_mean(x, xi);
    const auto jac = inner_jacobian_mean(x, xi);
    if (!y || !jac) return std::nullopt;
    acc += jac->transpose() * grad_f(*y, xi);
  }
  return Vector(acc / static_cast<double>(n()) + regularizer_grad(x));
}

std::optional<double> FccoProblem::objective(const Vector& x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    const OuterDraw xi = outer_at(i);
    const auto y = inner_mean(x, xi);
    if (!y) return std::nullopt;
    acc += f_value(*y, xi);
  }
  return acc / static_cast<double>(n()) + regularizer_value(x);
}

// ---------------------------------------------------------------- LinearCompositionProblem

Vector LinearCompositionProblem::mean_features(std::size_t i) const { return mean_feature_matrix().row(static_cast<Eigen::Index>(i)).transpose(); }

Vector LinearCompositionProblem::g_value(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const {
  return Vector::Constant(1, features(eta, xi).dot(x));
}

Matrix LinearCompositionProblem::g_jacobian(const Vector&, const InnerDraw& eta, const OuterDraw& xi) const {
  return features(eta, xi).transpose();
}

Vector LinearCompositionProblem::g_vjp(const Vector&, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const {
  return features(eta, xi) * v[0];
}

double LinearCompositionProblem::f_value(const Vector& y, const OuterDraw& xi) const { return loss(y[0], xi.index); }

Vector LinearCompositionProblem::grad_f(const Vector& y, const OuterDraw& xi) const {
  return Vector::Constant(1, loss_d1(y[0], xi.index));
}

double LinearCompositionProblem::regularizer_value(const Vector& x) const { return 0.5 * l2_coeff() * x.squaredNorm(); }
Vector LinearCompositionProblem::regularizer_grad(const Vector& x) const { return l2_coeff() * x; }

std::optional<Vector> LinearCompositionProblem::inner_mean(const Vector& x, const OuterDraw& xi) const {
  return Vector::Constant(1, mean_feature_matrix().row(static_cast<Eigen::Index>(xi.index)).dot(x));
}

std::optional<Matrix> LinearCompositionProblem::inner_jacobian_mean(const Vector&, const OuterDraw& xi) const {
  return Matrix(mean_feature_matrix().row(static_cast<Eigen::Index>(xi.index)));
}

std::optional<Vector> LinearCompositionProblem::true_grad(const Vector& x) const {
  const Matrix& phi = mean_feature_matrix();
  const Vector y = phi * x;
  Vector w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = loss_d1(y[i], static_cast<std::size_t>(i));
  return Vector(phi.transpose() * w / static_cast<double>(n()) + regularizer_grad(x));
}

std::optional<double> LinearCompositionProblem::objective(const Vector& x) const {
  const Vector y = mean_feature_matrix() * x;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += loss(y[i], static_cast<std::size_t>(i));
  return acc / static_cast<double>(n()) + regularizer_value(x);
}

std::optional<Vector> LinearCompositionProblem::reference_point() const {
  std::call_once(reference_once_, [this] { reference_ = solve_reference(); });
  return reference_;
}

Vector LinearCompositionProblem::solve_reference(double tol, int max_iter) const {
  const Matrix& phi = mean_feature_matrix();
  const double inv_n = 1.0 / static_cast<double>(n());
  Vector x = Vector::Zero(dim_x());
  for (int it = 0; it < max_iter; ++it) {
    const Vector grad = *true_grad(x);
    if (grad.norm() <= tol) break;
    const Vector y = phi * x;
    Vector curv(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) curv[i] = loss_d2(y[i], static_cast<std::size_t>(i));
    Matrix hess = phi.transpose() * curv.asDiagonal() * phi * inv_n;
    hess.diagonal().array() += l2_coeff();
    const Vector step = hess.ldlt().solve(grad);
    const double f0 = *objective(x);
    double t = 1.0;
    Vector next = x - step;
    while (*objective(next) > f0 - 0.25 * t * grad.dot(step) && t > 1e-10) {
      t *= 0.5;
      next = x - t * step;
    }
    if ((next - x).norm() == 0.0) break;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------- invariant logistic regression

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

}  // namespace

InvariantLogisticRegression::InvariantLogisticRegression(Matrix a, Vector b, double noise_variance, double l2_coeff)
    : a_(std::move(a)), b_(std::move(b)), noise_variance_(noise_variance), l2_coeff_(l2_coeff) {
  require(a_.rows() >= 1 && a_.cols() >= 1, "invariant LR needs n >= 1 and d >= 1");
  require(b_.size() == a_.rows(), "invariant LR: one label per sample");
  require(noise_variance_ >= 0.0, "noise_variance must be >= 0");
  require(l2_coeff_ >= 0.0, "l2_coeff must be >= 0");
}

OuterDraw InvariantLogisticRegression::outer_at(std::size_t i) const { return {i, Vector()}; }

InnerDraw InvariantLogisticRegression::sample_eta(const OuterDraw& xi, RngStream& rng) const {
  const double sd = std::sqrt(noise_variance_);
  Vector eta = a_.row(static_cast<Eigen::Index>(xi.index)).transpose();
  for (Eigen::Index k = 0; k < eta.size(); ++k) eta[k] += sd * rng.normal();
  return {xi.index, std::move(eta)};
}

Vector InvariantLogisticRegression::features(const InnerDraw& eta, const OuterDraw&) const { return eta.data; }

double InvariantLogisticRegression::loss(double y, std::size_t i) const { return softplus(-b_[static_cast<Eigen::Index>(i)] * y); }

double InvariantLogisticRegression::loss_d1(double y, std::size_t i) const {
  const double b = b_[static_cast<Eigen::Index>(i)];
  return -b * sigmoid(-b * y);
}

double InvariantLogisticRegression::loss_d2(double y, std::size_t i) const {
  const double b = b_[static_cast<Eigen::Index>(i)];
  return b * b * sigmoid(b * y) * sigmoid(-b * y);
}

// ---------------------------------------------------------------- IV regression

IvRegression::IvRegression(Matrix z, Vector y) : z_(std::move(z)), y_(std::move(y)) {
  require(z_.rows() >= 1 && z_.cols() == 2, "IV regression needs n >= 1 instruments in R^2");
  require(y_.size() == z_.rows(), "IV regression: one outcome per instrument");
  mean_features_.resize(z_.rows(), 2);
  for (Eigen::Index i = 0; i < z_.rows(); ++i) {
    mean_features_(i, 0) = conditional_mean(z_(i, 0));
    mean_features_(i, 1) = 1.0;
  }
}

OuterDraw IvRegression::outer_at(std::size_t i) const {
  return {i, z_.row(static_cast<Eigen::Index>(i)).transpose()};
}

InnerDraw IvRegression::sample_eta(const OuterDraw& xi, RngStream& rng) const {
  const double z1 = z_(static_cast<Eigen::Index>(xi.index), 0);
  const double e = rng.normal();
  const double gamma = -std::log(rng.uniform_open()) / kGammaRate;
  return {xi.index, Vector::Constant(1, 0.5 * z1 + 0.5 * e + gamma)};
}

Vector IvRegression::features(const InnerDraw& eta, const OuterDraw&) const {
  Vector phi(2);
  phi << eta.data[0], 1.0;
  return phi;
}

double IvRegression::loss(double y, std::size_t i) const {
  const double r = std::abs(y - y_[static_cast<Eigen::Index>(i)]);
  return r + std::log1p(std::exp(-2.0 * r)) - std::numbers::ln2;
}

double IvRegression::loss_d1(double y, std::size_t i) const { return std::tanh(y - y_[static_cast<Eigen::Index>(i)]); }

double IvRegression::loss_d2(double y, std::size_t i) const {
  const double t = std::tanh(y - y_[static_cast<Eigen::Index>(i)]);
  return 1.0 - t * t;
}

// ---------------------------------------------------------------- sinusoid MAML

namespace {

constexpr double kInputLo = -5.0;
constexpr double kInputHi = 5.0;

void fill_inputs(Vector& out, Eigen::Index offset, int count, RngStream& rng) {
  for (int k = 0; k < count; ++k) out[offset + k] = kInputLo + (kInputHi - kInputLo) * rng.uniform();
}

}  // namespace

SinusoidMaml::SinusoidMaml(MamlOptions options, std::uint64_t seed) : options_(std::move(options)) {
  options_.net.validate();
  require(options_.alpha >= 0.0, "alpha must be >= 0");
  require(options_.support_size >= 1 && options_.query_size >= 1, "support and query sizes must be >= 1");
  require(options_.eval_tasks >= 1 && options_.eval_points >= 1, "evaluation set must be nonempty");
  require(options_.eval_adaptation_steps >= 0, "eval_adaptation_steps must be >= 0");
  const RngStream root(seed, 0x5e7a1);
  eval_set_.reserve(static_cast<std::size_t>(options_.eval_tasks));
  for (int k = 0; k < options_.eval_tasks; ++k) {
    RngStream rng = root.substream(static_cast<std::uint64_t>(k));
    EvalTask task;
    task.task = sample_xi(rng);
    task.support = sample_eta(task.task, rng);
    task.points.resize(static_cast<std::size_t>(options_.eval_points));
    for (double& t : task.points) t = kInputLo + (kInputHi - kInputLo) * rng.uniform();
    eval_set_.push_back(std::move(task));
  }
}

OuterDraw SinusoidMaml::sample_xi(RngStream& rng) const {
  Vector data(2 + options_.query_size);
  data[0] = 0.1 + 4.9 * rng.uniform();
  data[1] = std::numbers::pi * rng.uniform();
  fill_inputs(data, 2, options_.query_size, rng);
  return {0, std::move(data)};
}

InnerDraw SinusoidMaml::sample_eta(const OuterDraw& xi, RngStream& rng) const {
  Vector data(options_.support_size);
  fill_inputs(data, 0, options_.support_size, rng);
  return {xi.index, std::move(data)};
}

SineData SinusoidMaml::task_data(const OuterDraw& xi, std::span<const double> inputs) {
  return {xi.data[0], xi.data[1], inputs};
}

namespace {

std::span<const double> as_span(const Vector& v, Eigen::Index offset = 0) {
  return {v.data() + offset, static_cast<std::size_t>(v.size() - offset)};
}

}  // namespace

Vector SinusoidMaml::g_value(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const {
  if (options_.alpha == 0.0) return x;
  return x - options_.alpha * loss_and_grad(options_.net, x, task_data(xi, as_span(eta.data))).grad;
}

Vector SinusoidMaml::hessian_vector(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const {
  const double vn = v.norm();
  if (vn == 0.0) return Vector::Zero(x.size());
  const double h = 1e-5 / vn;
  const SineData data = task_data(xi, as_span(eta.data));
  const Vector gp = loss_and_grad(options_.net, x + h * v, data).grad;
  const Vector gm = loss_and_grad(options_.net, x - h * v, data).grad;
  return (gp - gm) / (2.0 * h);
}

Matrix SinusoidMaml::g_jacobian(const Vector& x, const InnerDraw& eta, const OuterDraw& xi) const {
  const auto d = static_cast<Eigen::Index>(dim_x());
  Matrix jac = Matrix::Identity(d, d);
  if (options_.jacobian_mode == JacobianMode::first_order || options_.alpha == 0.0) return jac;
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector e = Vector::Zero(d);
    e[j] = 1.0;
    jac.col(j) -= options_.alpha * hessian_vector(x, eta, xi, e);
  }
  return jac;
}

Vector SinusoidMaml::g_vjp(const Vector& x, const InnerDraw& eta, const OuterDraw& xi, const Vector& v) const {
  if (options_.jacobian_mode == JacobianMode::first_order || options_.alpha == 0.0) return v;
  // The Hessian is symmetric, so J^T v = v - alpha H v.
  return v - options_.alpha * hessian_vector(x, eta, xi, v);
}

double SinusoidMaml::f_value(const Vector& y, const OuterDraw& xi) const {
  return loss_only(options_.net, y, task_data(xi, as_span(xi.data, 2)));
}

Vector SinusoidMaml::grad_f(const Vector& y, const OuterDraw& xi) const {
  return loss_and_grad(options_.net, y, task_data(xi, as_span(xi.data, 2))).grad;
}

std::optional<double> SinusoidMaml::eval_loss(const Vector& x) const {
  const double step = options_.eval_step_size > 0.0 ? options_.eval_step_size : options_.alpha;
  double acc = 0.0;
  for (const auto& task : eval_set_) {
    Vector w = x;
    const SineData support = task_data(task.task, as_span(task.support.data));
    for (int s = 0; s < options_.eval_adaptation_steps; ++s) w -= step * loss_and_grad(options_.net, w, support).grad;
    // loss_only is half the mean squared error.
    acc += 2.0 * loss_only(options_.net, w, task_data(task.task, task.points));
  }
  return acc / static_cast<double>(eval_set_.size());
}

Vector SinusoidMaml::initial_point(RngStream& rng) const { return init_weights(options_.net, rng); }

// ---------------------------------------------------------------- factories

std::shared_ptr<InvariantLogisticRegression> make_invariant_lr(std::size_t n, int d, double noise_variance,
                                                               double l2_coeff, std::uint64_t seed) {
  require(n >= 1 && d >= 1, "invariant LR needs n >= 1 and d >= 1");
  require(noise_variance >= 0.0, "noise_variance must be >= 0");
  RngStream rng(seed, 0x11a);
  Vector x_star(d);
  for (int k = 0; k < d; ++k) x_star[k] = rng.normal();
  Matrix a(static_cast<Eigen::Index>(n), d);
  Vector b(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < d; ++k) a(i, k) = rng.normal();
    b[i] = a.row(i).dot(x_star) >= 0.0 ? 1.0 : -1.0;
  }
  return std::make_shared<InvariantLogisticRegression>(std::move(a), std::move(b), noise_variance, l2_coeff);
}

std::shared_ptr<IvRegression> make_iv_regression(std::size_t n, std::uint64_t seed) {
  require(n >= 1, "IV regression needs n >= 1");
  RngStream rng(seed, 0x1f);
  const double delta_sd = std::sqrt(0.1);
  Matrix z(static_cast<Eigen::Index>(n), 2);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z(i, 0) = -3.0 + 6.0 * rng.uniform();
    z(i, 1) = -3.0 + 6.0 * rng.uniform();
    const double e = rng.normal();
    const double delta = delta_sd * rng.normal();
    const double gamma = -std::log(rng.uniform_open()) / IvRegression::kGammaRate;
    const double x = 0.5 * z(i, 0) + 0.5 * e + gamma;
    y[i] = x + e + delta;
  }
  return std::make_shared<IvRegression>(std::move(z), std::move(y));
}

std::shared_ptr<SinusoidMaml> make_sinusoid_maml(double alpha, const NetSpec& net, std::uint64_t seed) {
  MamlOptions options;
  options.alpha = alpha;
  options.net = net;
  return std::make_shared<SinusoidMaml>(std::move(options), seed);
}

// ---------------------------------------------------------------- dataset files

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  return out;
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t& columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParameterError(path + ": missing header");
  columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != columns)
      throw ParameterError(path + ": row " + std::to_string(rows.size() + 1) + " has " + std::to_string(row.size()) +
                           " fields, expected " + std::to_string(columns));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParameterError(path + ": no records");
  return rows;
}

}  // namespace

void dump_dataset_csv(const InvariantLogisticRegression& problem, const std::string& path) {
  auto out = open_for_write(path);
  const Matrix& a = problem.samples();
  for (Eigen::Index k = 0; k < a.cols(); ++k) out << "a" << k << ",";
  out << "b\n";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) out << a(i, k) << ",";
    out << problem.labels()[i] << "\n";
  }
}

void dump_dataset_csv(const IvRegression& problem, const std::string& path) {
  auto out = open_for_write(path);
  out << "z1,z2,y\n";
  for (Eigen::Index i = 0; i < problem.instruments().rows(); ++i)
    out << problem.instruments()(i, 0) << "," << problem.instruments()(i, 1) << "," << problem.outcomes()[i] << "\n";
}

std::shared_ptr<InvariantLogisticRegression> load_invariant_lr_csv(const std::string& path, double noise_variance,
                                                                   double l2_coeff) {
  std::size_t cols = 0;
  const auto rows = read_numeric_csv(path, cols);
  require(cols >= 2, path + ": need at least one feature column and a label");
  Matrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  Vector b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k + 1 < cols; ++k) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    b[static_cast<Eigen::Index>(i)] = rows[i][cols - 1];
  }
  return std::make_shared<InvariantLogisticRegression>(std::move(a), std::move(b), noise_variance, l2_coeff);
}

std::shared_ptr<IvRegression> load_iv_regression_csv(const std::string& path) {
  std::size_t cols = 0;
  const auto rows = read_numeric_csv(path, cols);
  require(cols == 3, path + ": expected columns z1,z2,y");
  Matrix z(static_cast<Eigen::Index>(rows.size()), 2);
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    z(r, 0) = rows[i][0];
    z(r, 1) = rows[i][1];
    y[r] = rows[i][2];
  }
  return std::make_shared<IvRegression>(std::move(z), std::move(y));
}

// ---------------------------------------------------------------- constants

void SmoothnessConstants::derive() {
  L_F = L_g * C_f + C_g * C_g * L_f;
  C_F = C_f * C_g;
  Ltilde_F = zeta_g * C_f + sigma_g * C_g * L_f;
}

namespace {

Vector random_unit(int dim, RngStream& rng) {
  Vector u(dim);
  for (int k = 0; k < dim; ++k) u[k] = rng.normal();
  const double nrm = u.norm();
  return nrm > 0.0 ? Vector(u / nrm) : Vector(Vector::Unit(dim, 0));
}

// Directional derivatives of grad f along u at y, orders 1..4 (central stencils).
std::array<double, 4> grad_f_derivatives(const CsoProblem& problem, const Vector& y, const Vector& u,
                                         const OuterDraw& xi, double h) {
  const Vector q0 = problem.grad_f(y, xi);
  const Vector p1 = problem.grad_f(y + h * u, xi);
  const Vector m1 = problem.grad_f(y - h * u, xi);
  const Vector p2 = problem.grad_f(y + 2.0 * h * u, xi);
  const Vector m2 = problem.grad_f(y - 2.0 * h * u, xi);
  return {((p1 - m1) / (2.0 * h)).norm(), ((p1 - 2.0 * q0 + m1) / (h * h)).norm(),
          ((p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h)).norm(),
          ((p2 - 4.0 * p1 + 6.0 * q0 - 4.0 * m1 + m2) / (h * h * h * h)).norm()};
}

}  // namespace

SmoothnessConstants compute_constants(const CsoProblem& problem, int probes, RngStream& rng,
                                      const ConstantsOptions& options) {
  require(probes >= 10, "compute_constants needs probes >= 10");
  require(options.inner_draws >= 2, "compute_constants needs inner_draws >= 2");
  const int d = problem.dim_x();
  const int p = problem.dim_y();
  const double h = options.fd_step;
  const auto base = problem.reference_point();

  SmoothnessConstants c;
  for (int probe = 0; probe < probes; ++probe) {
    RngStream prng = rng.substream(static_cast<std::uint64_t>(probe));
    Vector x = base ? *base : problem.initial_point(prng);
    for (int k = 0; k < d; ++k) x[k] += prng.normal();
    const OuterDraw xi = problem.sample_xi(prng);
    const Vector u_y = random_unit(p, prng);
    const Vector u_x = random_unit(d, prng);

    // Inner values and Jacobian-transpose products along u_y.
    const int draws = options.inner_draws;
    std::vector<Vector> values;
    std::vector<Vector> vjps;
    values.reserve(static_cast<std::size_t>(draws));
    vjps.reserve(static_cast<std::size_t>(draws));
    Vector mean_g = Vector::Zero(p);
    Vector mean_vjp = Vector::Zero(d);
    for (int j = 0; j < draws; ++j) {
      const InnerDraw eta = problem.sample_eta(xi, prng);
      values.push_back(problem.g_value(x, eta, xi));
      vjps.push_back(problem.g_vjp(x, eta, xi, u_y));
      mean_g += values.back();
      mean_vjp += vjps.back();
      c.C_g = std::max(c.C_g, vjps.back().norm());
      if (j == 0) {
        const Vector dj = (problem.g_vjp(x + h * u_x, eta, xi, u_y) - problem.g_vjp(x - h * u_x, eta, xi, u_y)) / (2.0 * h);
        c.L_g = std::max(c.L_g, dj.norm());
      }
    }
    mean_g /= draws;
    mean_vjp /= draws;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, z2 = 0.0;
    for (int j = 0; j < draws; ++j) {
      const Vector dev = values[static_cast<std::size_t>(j)] - mean_g;
      const double r2 = dev.squaredNorm();
      s2 += r2;
      s3 += dev.array().cube().sum();
      s4 += r2 * r2;
      z2 += (vjps[static_cast<std::size_t>(j)] - mean_vjp).squaredNorm();
    }
    c.sigma2 = std::max(c.sigma2, s2 / draws);
    c.sigma3 = std::max(c.sigma3, std::abs(s3 / draws));
    c.sigma4 = std::max(c.sigma4, s4 / draws);
    c.zeta_g = std::max(c.zeta_g, std::sqrt(z2 / (draws - 1)));

    // Derivatives of grad f at the inner mean and at a few inner values.
    for (int j = 0; j < 4; ++j) {
      const Vector& y = j == 0 ? mean_g : values[static_cast<std::size_t>(j)];
      const auto der = grad_f_derivatives(problem, y, u_y, xi, h);
      for (std::size_t l = 0; l < 4; ++l) c.a[l] = std::max(c.a[l], der[l]);
      c.C_f = std::max(c.C_f, problem.grad_f(y, xi).norm());
    }
  }
  c.L_f = c.a[0];
  c.sigma_g = std::sqrt(c.sigma2);
  c.derive();
  return c;
}

}  // namespace cso
