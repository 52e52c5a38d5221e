#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "cso/common.hpp"
#include "cso/sampling.hpp"

namespace cso {

enum class ExtrapolationOrder : int { first = 1, second = 2, third = 3 };

/// How the third-order operator sources its sub-averages. `independent`
/// draws every constituent mean afresh (32m base draws); `shared_pool` draws
/// one pool of 12m base draws and carves every D_{jm} pair out of its prefix.
enum class DrawMode { independent, shared_pool };

int order_value(ExtrapolationOrder order);
ExtrapolationOrder order_from_int(int k);

/// Base draws consumed by one operator application at inner batch m.
std::uint64_t base_draws_per_application(ExtrapolationOrder order, int m, DrawMode mode = DrawMode::independent);

/// Affine combination of D_{jm} second-order operators forming L^(3):
/// pairs (j, coefficient).
inline constexpr std::array<std::pair<int, double>, 5> kThirdOrderCombination = {{
    {1, -1.0 / 36.0}, {2, 5.0 / 9.0}, {3, -3.0 / 4.0}, {4, -16.0 / 9.0}, {6, 3.0}}};

/// One evaluation of q at s + offset with the given affine weight.
template <class V>
struct StencilPoint {
  double weight;
  V offset;
};

template <class V>
using Stencil = std::vector<StencilPoint<V>>;

/// Appends scale * [2 q(s + (d1+d2)/2) - (q(s+d1) + q(s+d2))/2]. The
/// midpoint is the average of the two drawn means, never a fresh draw.
template <class V>
void append_second_order(Stencil<V>& stencil, double scale, const V& d1, const V& d2) {
  V mid = (d1 + d2) / 2.0;
  stencil.push_back({2.0 * scale, std::move(mid)});
  stencil.push_back({-0.5 * scale, d1});
  stencil.push_back({-0.5 * scale, d2});
}

/// Builds the evaluation stencil of L^(order). `source(j, slot)` must return a
/// draw from D_{jm}; slots 0 and 1 of the same j are the two i.i.d. draws of
/// one second-order application.
template <class V, class Source>
Stencil<V> build_stencil(ExtrapolationOrder order, Source&& source) {
  Stencil<V> stencil;
  switch (order) {
    case ExtrapolationOrder::first:
      stencil.push_back({1.0, source(1, 0)});
      break;
    case ExtrapolationOrder::second: {
      const V d1 = source(1, 0);
      const V d2 = source(1, 1);
      append_second_order(stencil, 1.0, d1, d2);
      break;
    }
    case ExtrapolationOrder::third:
      stencil.reserve(15);
      for (const auto& [j, coef] : kThirdOrderCombination) {
        const V d1 = source(j, 0);
        const V d2 = source(j, 1);
        append_second_order(stencil, coef, d1, d2);
      }
      break;
  }
  return stencil;
}

template <class V, class Q>
auto apply_stencil(const Stencil<V>& stencil, Q&& q, const V& s) {
  auto acc = q(V(s + stencil.front().offset));
  acc *= stencil.front().weight;
  for (std::size_t i = 1; i < stencil.size(); ++i) acc += stencil[i].weight * q(V(s + stencil[i].offset));
  return acc;
}

/// Sources sample means from a SampleAverage in the requested draw mode.
class MeanSampler {
 public:
  MeanSampler(const SampleAverage& avg, RngStream& rng, ExtrapolationOrder order, DrawMode mode);
  double scalar(int multiplier, int slot);
  Vector vector(int multiplier, int slot);
  std::uint64_t base_draws() const { return base_draws_; }

 private:
  const SampleAverage& avg_;
  RngStream& rng_;
  DrawMode mode_;
  std::vector<double> pool_;
  std::vector<Vector> vector_pool_;
  std::uint64_t base_draws_ = 0;
};

/// q : R^p -> R^l together with optional derivative bounds a_1..a_4.
struct QueryFunction {
  std::function<Vector(const Vector&)> eval;
  int input_dim = 1;
  int output_dim = 1;
  std::array<std::optional<double>, 4> derivative_bounds{};

  Vector operator()(const Vector& s) const;
};

using ScalarQuery = std::function<double(double)>;

Vector extrapolate1(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng);
Vector extrapolate2(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng);
Vector extrapolate3(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng,
                    DrawMode mode = DrawMode::independent);
Vector extrapolate(ExtrapolationOrder order, const QueryFunction& q, const Vector& s, const SampleAverage& avg,
                   RngStream& rng, DrawMode mode = DrawMode::independent);

/// Scalar fast path with identical semantics.
double extrapolate(ExtrapolationOrder order, const ScalarQuery& q, double s, const SampleAverage& avg,
                   RngStream& rng, DrawMode mode = DrawMode::independent);

struct MeasureOptions {
  /// Overrides q(s + E[delta]) when the base law has no known mean.
  std::optional<double> true_value;
  DrawMode mode = DrawMode::independent;
  /// Regress out sum_i w_i (offset_i - E[delta])^k for k = 1, 2, whose means
  /// are known exactly, to shrink the Monte Carlo error of the bias estimate.
  bool control_variate = false;
};

struct BiasMeasurement {
  double bias_est = 0.0;
  double bias_ci_halfwidth = 0.0;
  double variance_est = 0.0;
  double mean = 0.0;
  double true_value = 0.0;
  std::size_t reps = 0;
  std::uint64_t base_draws = 0;
};

/// Monte Carlo bias, 95% normal CI half-width and output variance of one
/// operator. Rep r uses rng.substream(r).
BiasMeasurement measure_bias_and_variance(ExtrapolationOrder order, const ScalarQuery& q, double s,
                                          const Distribution& base, int m, std::size_t reps, const RngStream& rng,
                                          const MeasureOptions& options = {});

/// |running mean of operator outputs - true value| after each checkpoint count.
std::vector<double> estimation_error_curve(ExtrapolationOrder order, const ScalarQuery& q, double s,
                                           const Distribution& base, int m, const std::vector<std::size_t>& checkpoints,
                                           const RngStream& rng, std::optional<double> true_value = std::nullopt,
                                           DrawMode mode = DrawMode::independent);

namespace testfn {

double triangle_wave(double x);
ScalarQuery half_square();
ScalarQuery quartic();
ScalarQuery relu();
/// x^2/2 + TriangleWave(x) + 1.
ScalarQuery perturbed_quadratic();

}  // namespace testfn

}  // namespace cso
