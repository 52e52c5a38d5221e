#include "cso/estimators_fcco.hpp"

#include <algorithm>

namespace cso {

void FccoHyperParams::validate(std::size_t n) const {
  require(B1 >= 1 && B2 >= 1 && B2 <= B1, "batch sizes must satisfy 1 <= B2 <= B1");
  require(static_cast<std::size_t>(B1) <= n, "B1 must not exceed n");
  require(S1 >= 1 && S2 >= 1 && S2 <= S1, "inner batches must satisfy 1 <= S2 <= S1");
  require(p_out > 0.0 && p_out <= 1.0, "p_out must lie in (0, 1]");
  require(p_in > 0.0 && p_in <= 1.0, "p_in must lie in (0, 1]");
  require(gamma >= 0.0, "gamma must be >= 0");
}

std::vector<std::size_t> sample_indices(std::size_t n, int count, RngStream& rng) {
  require(count >= 1 && static_cast<std::size_t>(count) <= n, "cannot draw that many distinct indices");
  const auto k = static_cast<std::size_t>(count);
  std::vector<std::size_t> out;
  out.reserve(k);
  if (k == n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  // Floyd's algorithm: k draws, no rejection loop.
  std::vector<char> taken(n, 0);
  for (std::size_t j = n - k; j < n; ++j) {
    auto r = static_cast<std::size_t>(rng.below(j + 1));
    if (taken[r]) r = j;
    taken[r] = 1;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Vector mean_fresh(const FccoProblem& problem, const OuterDraw& xi, const Vector& x, int count, RngStream& rng) {
  Vector acc = problem.g_value(x, problem.sample_eta(xi, rng), xi);
  for (int j = 1; j < count; ++j) acc += problem.g_value(x, problem.sample_eta(xi, rng), xi);
  return acc / static_cast<double>(count);
}

Vector mean_difference(const FccoProblem& problem, const OuterDraw& xi, const Vector& x, const Vector& anchor,
                       int count, RngStream& rng) {
  Vector acc = Vector::Zero(problem.dim_y());
  for (int j = 0; j < count; ++j) {
    const InnerDraw eta = problem.sample_eta(xi, rng);
    acc += problem.g_value(x, eta, xi) - problem.g_value(anchor, eta, xi);
  }
  return acc / static_cast<double>(count);
}

struct TrackerStart {
  const Vector* y;
  const Vector* y1;
  const Vector* y2;
};

TrackerStart start_of(const Vector& y, const Vector& y1, const Vector& y2) {
  // A tracker last advanced without splitting seeds both halves.
  if (y1.size() == 0 || y2.size() == 0) return {&y, &y, &y};
  return {&y, &y1, &y2};
}

TrackerDraw draw_tracker(const FccoProblem& problem, const OuterDraw& xi, const Vector& x, const Vector& anchor,
                         const TrackerStart& old, bool fresh, const FccoHyperParams& params, bool split, RngStream& rng,
                         std::uint64_t& draws) {
  const int batch = fresh ? params.S1 : params.S2;
  auto one = [&](int count, const Vector* from) {
    draws += static_cast<std::uint64_t>(count);
    return fresh ? mean_fresh(problem, xi, x, count, rng)
                 : Vector(*from + mean_difference(problem, xi, x, anchor, count, rng));
  };
  TrackerDraw out;
  if (!split) {
    out.y = one(batch, old.y);
    return out;
  }
  const int half = std::max(1, batch / 2);
  out.half1 = one(half, old.y1);
  out.half2 = one(half, old.y2);
  out.y = (out.half1 + out.half2) / 2.0;
  return out;
}

Matrix mean_jacobian(const FccoProblem& problem, const OuterDraw& xi, const Vector& x, int count, RngStream& rng) {
  Matrix acc = problem.g_jacobian(x, problem.sample_eta(xi, rng), xi);
  for (int j = 1; j < count; ++j) acc += problem.g_jacobian(x, problem.sample_eta(xi, rng), xi);
  return acc / static_cast<double>(count);
}

/// grad f_i at the tracker, or its second-order extrapolation over the halves.
Vector outer_gradient(const FccoProblem& problem, const OuterDraw& xi, const TrackerDraw& draw, bool extrapolate) {
  if (!extrapolate) return problem.grad_f(draw.y, xi);
  Stencil<Vector> stencil;
  append_second_order(stencil, 1.0, draw.half1, draw.half2);
  Vector acc = stencil[0].weight * problem.grad_f(stencil[0].offset, xi);
  for (std::size_t k = 1; k < stencil.size(); ++k) acc += stencil[k].weight * problem.grad_f(stencil[k].offset, xi);
  return acc;
}

}  // namespace

TrackerDraw update_inner_value(InnerState& state, const FccoProblem& problem, std::size_t i, const Vector& x,
                               const FccoHyperParams& params, bool fresh, long t, bool split, RngStream& rng,
                               SampleCounter* counter) {
  fresh = fresh || !state.visited();
  const OuterDraw xi = problem.outer_at(i);
  std::uint64_t draws = 0;
  TrackerDraw draw =
      draw_tracker(problem, xi, x, state.phi, start_of(state.y, state.y1, state.y2), fresh, params, split, rng, draws);
  if (counter) counter->inner += draws;
  state.prev_y = std::move(state.y);
  state.prev_y1 = std::move(state.y1);
  state.prev_y2 = std::move(state.y2);
  state.prev_phi = state.phi;
  state.prev_fresh = fresh;
  state.y = draw.y;
  state.y1 = draw.half1;
  state.y2 = draw.half2;
  state.phi = x;
  state.last_visit = t;
  return draw;
}

void update_inner_jacobian(InnerState& state, const FccoProblem& problem, std::size_t i, const Vector& x,
                           const FccoHyperParams& params, bool fresh, RngStream& rng, SampleCounter* counter) {
  fresh = fresh || !state.visited();
  const OuterDraw xi = problem.outer_at(i);
  if (fresh) {
    state.z = mean_jacobian(problem, xi, x, params.S1, rng);
    if (counter) counter->inner += static_cast<std::uint64_t>(params.S1);
    return;
  }
  Matrix acc = Matrix::Zero(state.z.rows(), state.z.cols());
  for (int j = 0; j < params.S2; ++j) {
    const InnerDraw eta = problem.sample_eta(xi, rng);
    acc += problem.g_jacobian(x, eta, xi) - problem.g_jacobian(state.phi, eta, xi);
  }
  state.z += acc / static_cast<double>(params.S2);
  if (counter) counter->inner += static_cast<std::uint64_t>(params.S2);
}

namespace {

Vector nested_step(NestedVrState& state, const FccoProblem& problem, const Vector& x, const FccoHyperParams& params,
                   long t, const RngStream& rng, SampleCounter* counter, bool extrapolate) {
  const std::size_t n = problem.n();
  params.validate(n);
  if (extrapolate && params.order == ExtrapolationOrder::third)
    throw ParameterError("third-order extrapolation is not available for the finite-sum estimators");
  const bool split = extrapolate && params.order == ExtrapolationOrder::second;
  if (state.inner.size() != n) {
    state.inner.assign(n, InnerState{});
    state.valid = false;
  }

  RngStream coin_out = rng.substream(0);
  RngStream coin_in = rng.substream(1);
  RngStream index_rng = rng.substream(2);
  const bool large = t == 0 || !state.valid || coin_out.bernoulli(params.p_out);
  const bool fresh = coin_in.bernoulli(params.p_in);
  const int batch = large ? params.B1 : params.B2;
  const auto indices = sample_indices(n, batch, index_rng);

  Vector acc = Vector::Zero(x.size());
  for (std::size_t i : indices) {
    InnerState& st = state.inner[i];
    const OuterDraw xi = problem.outer_at(i);
    if (!large) {
      // (z_i^t)^T q(y~_i^t): y~ is an i.i.d. copy of the current tracker,
      // redrawn by replaying its last update on fresh inner samples.
      RngStream redraw = rng.substream(5, i);
      std::uint64_t draws = 0;
      Matrix z_old;
      TrackerDraw y_old;
      if (st.visited()) {
        z_old = st.z;
        y_old = draw_tracker(problem, xi, st.phi, st.prev_phi, start_of(st.prev_y, st.prev_y1, st.prev_y2),
                             st.prev_fresh, params, split, redraw, draws);
      } else {
        z_old = mean_jacobian(problem, xi, state.last_x, params.S1, redraw);
        draws += static_cast<std::uint64_t>(params.S1);
        const Vector none;
        y_old = draw_tracker(problem, xi, state.last_x, state.last_x, start_of(none, none, none), true, params, split,
                             redraw, draws);
      }
      if (counter) counter->inner += draws;
      acc -= z_old.transpose() * outer_gradient(problem, xi, y_old, split);
    }
    RngStream jac_rng = rng.substream(4, i);
    RngStream val_rng = rng.substream(3, i);
    update_inner_jacobian(st, problem, i, x, params, fresh, jac_rng, counter);
    const TrackerDraw draw = update_inner_value(st, problem, i, x, params, fresh, t, split, val_rng, counter);
    acc += st.z.transpose() * outer_gradient(problem, xi, draw, split);
  }
  if (counter) counter->outer += static_cast<std::uint64_t>(batch);

  Vector grad;
  if (large) {
    grad = acc / static_cast<double>(params.B1) + problem.regularizer_grad(x);
  } else {
    grad = state.last_grad + acc / static_cast<double>(params.B2) + problem.regularizer_grad(x) -
           problem.regularizer_grad(state.last_x);
  }
  state.last_grad = grad;
  state.last_x = x;
  state.valid = true;
  state.last_was_large = large;
  return grad;
}

}  // namespace

Vector nestedvr_step(NestedVrState& state, const FccoProblem& problem, const Vector& x, const FccoHyperParams& params,
                     long t, const RngStream& rng, SampleCounter* counter) {
  return nested_step(state, problem, x, params, t, rng, counter, false);
}

Vector enestedvr_step(NestedVrState& state, const FccoProblem& problem, const Vector& x,
                      const FccoHyperParams& params, long t, const RngStream& rng, SampleCounter* counter) {
  return nested_step(state, problem, x, params, t, rng, counter, true);
}

}  // namespace cso
