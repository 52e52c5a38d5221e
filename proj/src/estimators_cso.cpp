#include "cso/estimators_cso.hpp"

namespace cso {

void CsoHyperParams::validate() const {
  require(m >= 1, "m must be >= 1");
  require(B1 >= 1 && B2 >= 1 && B2 <= B1, "batch sizes must satisfy 1 <= B2 <= B1");
  require(p_out > 0.0 && p_out <= 1.0, "p_out must lie in (0, 1]");
  require(gamma >= 0.0, "gamma must be >= 0");
}

namespace {

constexpr std::uint64_t kValueRole = 0;
constexpr std::uint64_t kJacobianRole = 1;
constexpr std::uint64_t kOuterRole = 2;

Vector mean_inner_value(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int count, RngStream& rng) {
  Vector acc = problem.g_value(x, problem.sample_eta(xi, rng), xi);
  for (int j = 1; j < count; ++j) acc += problem.g_value(x, problem.sample_eta(xi, rng), xi);
  return acc / static_cast<double>(count);
}

/// (1/m sum_j J_j)^T v from m fresh Jacobian draws.
Vector mean_jacobian_product(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m, const Vector& v,
                             RngStream& rng) {
  Vector acc = problem.g_vjp(x, problem.sample_eta(xi, rng), xi, v);
  for (int j = 1; j < m; ++j) acc += problem.g_vjp(x, problem.sample_eta(xi, rng), xi, v);
  return acc / static_cast<double>(m);
}

}  // namespace

Vector extrapolated_outer_gradient(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m,
                                   ExtrapolationOrder order, RngStream& value_rng, DrawMode mode,
                                   std::uint64_t* draws) {
  require(m >= 1, "m must be >= 1");
  const bool pooled = order == ExtrapolationOrder::third && mode == DrawMode::shared_pool;
  std::vector<Vector> pool;
  if (pooled) {
    const auto n = base_draws_per_application(order, m, mode);
    pool.reserve(n);
    for (std::uint64_t j = 0; j < n; ++j) pool.push_back(problem.g_value(x, problem.sample_eta(xi, value_rng), xi));
    if (draws) *draws += n;
  }
  auto source = [&](int j, int slot) -> Vector {
    const int count = j * m;
    if (!pooled) {
      if (draws) *draws += static_cast<std::uint64_t>(count);
      return mean_inner_value(problem, x, xi, count, value_rng);
    }
    const auto begin = static_cast<std::size_t>(slot) * count;
    Vector acc = pool[begin];
    for (int k = 1; k < count; ++k) acc += pool[begin + k];
    return acc / static_cast<double>(count);
  };
  const auto stencil = build_stencil<Vector>(order, source);
  Vector acc = stencil.front().weight * problem.grad_f(stencil.front().offset, xi);
  for (std::size_t k = 1; k < stencil.size(); ++k) acc += stencil[k].weight * problem.grad_f(stencil[k].offset, xi);
  return acc;
}

Vector bsgd_gradient_at(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m, const RngStream& rng,
                        SampleCounter* counter) {
  require(m >= 1, "m must be >= 1");
  RngStream values = rng.substream(kValueRole);
  RngStream jacobians = rng.substream(kJacobianRole);
  const Vector y = mean_inner_value(problem, x, xi, m, values);
  const Vector v = problem.grad_f(y, xi);
  if (counter) counter->inner += 2 * static_cast<std::uint64_t>(m);
  return mean_jacobian_product(problem, x, xi, m, v, jacobians) + problem.regularizer_grad(x);
}

Vector bsgd_gradient(const CsoProblem& problem, const Vector& x, int m, const RngStream& rng, SampleCounter* counter) {
  RngStream outer = rng.substream(kOuterRole);
  const OuterDraw xi = problem.sample_xi(outer);
  if (counter) ++counter->outer;
  return bsgd_gradient_at(problem, x, xi, m, rng, counter);
}

Vector ebsgd_gradient_at(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m,
                         ExtrapolationOrder order, const RngStream& rng, SampleCounter* counter, DrawMode mode) {
  require(m >= 1, "m must be >= 1");
  RngStream values = rng.substream(kValueRole);
  RngStream jacobians = rng.substream(kJacobianRole);
  std::uint64_t draws = 0;
  const Vector v = extrapolated_outer_gradient(problem, x, xi, m, order, values, mode, &draws);
  if (counter) counter->inner += draws + static_cast<std::uint64_t>(m);
  return mean_jacobian_product(problem, x, xi, m, v, jacobians) + problem.regularizer_grad(x);
}

Vector ebsgd_gradient(const CsoProblem& problem, const Vector& x, int m, ExtrapolationOrder order,
                      const RngStream& rng, SampleCounter* counter, DrawMode mode) {
  RngStream outer = rng.substream(kOuterRole);
  const OuterDraw xi = problem.sample_xi(outer);
  if (counter) ++counter->outer;
  return ebsgd_gradient_at(problem, x, xi, m, order, rng, counter, mode);
}

Vector spider_step(SpiderState& state, const CsoProblem& problem, const Vector& x, const CsoHyperParams& params,
                   bool use_extrapolation, std::uint64_t t, const RngStream& rng, SampleCounter* counter) {
  params.validate();
  auto estimate = [&](const Vector& at, const OuterDraw& xi, const RngStream& s, SampleCounter* c) {
    return use_extrapolation ? ebsgd_gradient_at(problem, at, xi, params.m, params.order, s, c, params.draw_mode)
                             : bsgd_gradient_at(problem, at, xi, params.m, s, c);
  };

  RngStream coin = rng.substream(0);
  const bool large = t == 0 || !state.valid || coin.bernoulli(params.p_out);
  Vector grad;
  if (large) {
    grad = Vector::Zero(x.size());
    for (int b = 0; b < params.B1; ++b) {
      const RngStream s = rng.substream(1, static_cast<std::uint64_t>(b));
      RngStream outer = s.substream(kOuterRole);
      const OuterDraw xi = problem.sample_xi(outer);
      grad += estimate(x, xi, s, counter);
    }
    grad /= static_cast<double>(params.B1);
    if (counter) counter->outer += static_cast<std::uint64_t>(params.B1);
  } else {
    Vector correction = Vector::Zero(x.size());
    for (int b = 0; b < params.B2; ++b) {
      const RngStream s = rng.substream(2, static_cast<std::uint64_t>(b));
      RngStream outer = s.substream(kOuterRole);
      const OuterDraw xi = problem.sample_xi(outer);
      // Both evaluations replay the same inner streams; only the first is counted.
      const Vector now = estimate(x, xi, s, counter);
      const Vector before = estimate(state.last_x, xi, s, nullptr);
      correction += now - before;
    }
    grad = state.last_grad + correction / static_cast<double>(params.B2);
    if (counter) counter->outer += static_cast<std::uint64_t>(params.B2);
  }
  state.last_grad = grad;
  state.last_x = x;
  state.valid = true;
  state.last_was_large = large;
  return grad;
}

}  // namespace cso
