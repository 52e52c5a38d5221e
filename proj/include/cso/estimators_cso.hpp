#pragma once

#include <cstdint>

#include "cso/common.hpp"
#include "cso/extrapolation.hpp"
#include "cso/problems.hpp"
#include "cso/sampling.hpp"

namespace cso {

/// Cumulative inner (eta) and outer (xi) draws. A coupled pair of evaluations
/// that shares one eta at two iterates counts that eta once.
struct SampleCounter {
  std::uint64_t inner = 0;
  std::uint64_t outer = 0;
};

struct CsoHyperParams {
  int m = 1;
  int B1 = 1;
  int B2 = 1;
  double p_out = 1.0;
  double gamma = 0.01;
  ExtrapolationOrder order = ExtrapolationOrder::second;
  DrawMode draw_mode = DrawMode::independent;

  void validate() const;
};

// Stream layout of one per-xi estimate: xi from rng.substream(2), inner
// values from rng.substream(0), Jacobian draws from rng.substream(1).

/// (1/m sum J_eta~)^T grad f_xi(1/m sum g_eta) + grad r, with independent
/// value and Jacobian sets. Consumes 2m inner draws.
Vector bsgd_gradient(const CsoProblem& problem, const Vector& x, int m, const RngStream& rng,
                     SampleCounter* counter = nullptr);
Vector bsgd_gradient_at(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m, const RngStream& rng,
                        SampleCounter* counter = nullptr);

/// Jacobian mean times L^(order) applied to grad f_xi over the law of the
/// m-sample inner mean. Order 2 consumes m + 2m inner draws.
Vector ebsgd_gradient(const CsoProblem& problem, const Vector& x, int m, ExtrapolationOrder order,
                      const RngStream& rng, SampleCounter* counter = nullptr,
                      DrawMode mode = DrawMode::independent);
Vector ebsgd_gradient_at(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m,
                         ExtrapolationOrder order, const RngStream& rng, SampleCounter* counter = nullptr,
                         DrawMode mode = DrawMode::independent);

/// The p-vector L^(order) grad f_xi evaluated at s = 0 over draws of the
/// inner mean at x. Order 1 is grad f_xi at a plain m-sample mean.
Vector extrapolated_outer_gradient(const CsoProblem& problem, const Vector& x, const OuterDraw& xi, int m,
                                   ExtrapolationOrder order, RngStream& value_rng, DrawMode mode,
                                   std::uint64_t* draws);

struct SpiderState {
  Vector last_grad;
  Vector last_x;
  bool valid = false;
  bool last_was_large = true;
};

/// One BSpiderBoost (or E-BSpiderBoost) estimate at x_t. `rng` is the stream
/// of this iteration. Large branch: mean of B1 fresh per-xi estimates. Small
/// branch: last_grad + mean over B2 fresh xi of the difference of per-xi
/// estimates at x_t and at last_x computed from identical inner draws.
Vector spider_step(SpiderState& state, const CsoProblem& problem, const Vector& x, const CsoHyperParams& params,
                   bool use_extrapolation, std::uint64_t t, const RngStream& rng, SampleCounter* counter = nullptr);

}  // namespace cso
