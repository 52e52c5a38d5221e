#include "cso/extrapolation.hpp"

#include <cmath>
#include <numeric>

namespace cso {

int order_value(ExtrapolationOrder order) { return static_cast<int>(order); }

ExtrapolationOrder order_from_int(int k) {
  require(k >= 1 && k <= 3, "extrapolation order must be 1, 2 or 3");
  return static_cast<ExtrapolationOrder>(k);
}

std::uint64_t base_draws_per_application(ExtrapolationOrder order, int m, DrawMode mode) {
  require(m >= 1, "inner batch m must be >= 1");
  const auto mm = static_cast<std::uint64_t>(m);
  switch (order) {
    case ExtrapolationOrder::first: return mm;
    case ExtrapolationOrder::second: return 2 * mm;
    case ExtrapolationOrder::third: return mode == DrawMode::independent ? 32 * mm : 12 * mm;
  }
  return 0;
}

// ---------------------------------------------------------------- MeanSampler

MeanSampler::MeanSampler(const SampleAverage& avg, RngStream& rng, ExtrapolationOrder order, DrawMode mode)
    : avg_(avg), rng_(rng), mode_(order == ExtrapolationOrder::third ? mode : DrawMode::independent) {
  require(avg.m >= 1, "sample average requires m >= 1");
  if (mode_ == DrawMode::shared_pool) {
    const auto n = base_draws_per_application(order, avg.m, mode_);
    if (avg.base.is_scalar()) {
      pool_.resize(n);
      for (auto& v : pool_) v = avg.base.sample(rng_);
    } else {
      vector_pool_.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) vector_pool_.push_back(avg.base.sample_vector(rng_));
    }
    base_draws_ = n;
  }
}

double MeanSampler::scalar(int multiplier, int slot) {
  const int count = multiplier * avg_.m;
  if (mode_ == DrawMode::independent) {
    base_draws_ += static_cast<std::uint64_t>(count);
    return draw_mean(SampleAverage{avg_.base, count}, rng_);
  }
  const auto begin = pool_.begin() + static_cast<std::ptrdiff_t>(slot) * count;
  return std::accumulate(begin, begin + count, 0.0) / count;
}

Vector MeanSampler::vector(int multiplier, int slot) {
  const int count = multiplier * avg_.m;
  if (mode_ == DrawMode::independent) {
    base_draws_ += static_cast<std::uint64_t>(count);
    return draw_mean_vector(SampleAverage{avg_.base, count}, rng_);
  }
  Vector acc = vector_pool_[static_cast<std::size_t>(slot) * count];
  for (int i = 1; i < count; ++i) acc += vector_pool_[static_cast<std::size_t>(slot) * count + i];
  return acc / count;
}

// ---------------------------------------------------------------- operators

Vector QueryFunction::operator()(const Vector& s) const {
  if (s.size() != input_dim) throw ShapeError("query input has dimension " + std::to_string(s.size()) +
                                              ", expected " + std::to_string(input_dim));
  Vector out = eval(s);
  if (out.size() != output_dim) throw ShapeError("query output dimension mismatch");
  return out;
}

Vector extrapolate(ExtrapolationOrder order, const QueryFunction& q, const Vector& s, const SampleAverage& avg,
                   RngStream& rng, DrawMode mode) {
  if (s.size() != q.input_dim) throw ShapeError("point dimension does not match query input dimension");
  if (avg.base.dimension() != q.input_dim) throw ShapeError("distribution dimension does not match query input");
  MeanSampler sampler(avg, rng, order, mode);
  const auto stencil =
      build_stencil<Vector>(order, [&](int j, int slot) { return sampler.vector(j, slot); });
  return apply_stencil(stencil, q, s);
}

Vector extrapolate1(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng) {
  return extrapolate(ExtrapolationOrder::first, q, s, avg, rng);
}

Vector extrapolate2(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng) {
  return extrapolate(ExtrapolationOrder::second, q, s, avg, rng);
}

Vector extrapolate3(const QueryFunction& q, const Vector& s, const SampleAverage& avg, RngStream& rng,
                    DrawMode mode) {
  return extrapolate(ExtrapolationOrder::third, q, s, avg, rng, mode);
}

double extrapolate(ExtrapolationOrder order, const ScalarQuery& q, double s, const SampleAverage& avg,
                   RngStream& rng, DrawMode mode) {
  if (!avg.base.is_scalar()) throw ShapeError("scalar extrapolation needs a scalar law");
  MeanSampler sampler(avg, rng, order, mode);
  const auto stencil = build_stencil<double>(order, [&](int j, int slot) { return sampler.scalar(j, slot); });
  return apply_stencil(stencil, q, s);
}

// ---------------------------------------------------------------- measurement

namespace {

double resolve_true_value(const ScalarQuery& q, double s, const Distribution& base, std::optional<double> override) {
  if (override) return *override;
  const auto mean = base.mean();
  if (!mean) throw ParameterError("true value unknown: base law has no analytic mean and no override was given");
  return q(s + *mean);
}

}  // namespace

BiasMeasurement measure_bias_and_variance(ExtrapolationOrder order, const ScalarQuery& q, double s,
                                          const Distribution& base, int m, std::size_t reps, const RngStream& rng,
                                          const MeasureOptions& options) {
  require(reps >= 100, "bias measurement needs reps >= 100");
  require(m >= 1, "inner batch m must be >= 1");
  if (!base.is_scalar()) throw ShapeError("bias measurement supports scalar laws");
  const double truth = resolve_true_value(q, s, base, options.true_value);
  const auto centre = base.mean();
  if (options.control_variate && !centre) throw ParameterError("control variate needs the analytic mean of the law");

  const SampleAverage avg{base, m};
  // The centred offsets have known means: sum_i w_i (o_i - mu) has mean 0, and
  // sum_i w_i (o_i - mu)^2 has mean sigma^2 / m at order 1 and 0 otherwise,
  // since every second-order group cancels the variance term.
  const double sigma2 = options.control_variate ? base.exact_central_moment(2) : 0.0;
  const double z2_mean = order == ExtrapolationOrder::first ? sigma2 / m : 0.0;
  // Welford accumulators for (y, z1, z2).
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d co = Eigen::Matrix3d::Zero();
  std::uint64_t draws = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rep_rng = rng.substream(r);
    MeanSampler sampler(avg, rep_rng, order, options.mode);
    const auto stencil = build_stencil<double>(order, [&](int j, int slot) { return sampler.scalar(j, slot); });
    Eigen::Vector3d a(apply_stencil(stencil, q, s), 0.0, 0.0);
    if (options.control_variate) {
      for (const auto& p : stencil) {
        const double e = p.offset - *centre;
        a[1] += p.weight * e;
        a[2] += p.weight * e * e;
      }
      a[2] -= z2_mean;
    }
    draws += sampler.base_draws();
    const Eigen::Vector3d d = a - mean;
    mean += d / static_cast<double>(r + 1);
    co += d * (a - mean).transpose();
  }
  const double n = static_cast<double>(reps);
  BiasMeasurement out;
  out.reps = reps;
  out.base_draws = draws;
  out.true_value = truth;
  out.variance_est = co(0, 0) / (n - 1.0);
  double estimate = mean[0];
  double residual_var = out.variance_est;
  if (options.control_variate) {
    const Eigen::Matrix2d szz = co.bottomRightCorner<2, 2>();
    const Eigen::Vector2d szy = co.block<2, 1>(1, 0);
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(szz);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && szz.determinant() > 1e-12 * szz.trace() * szz.trace()) {
      const Eigen::Vector2d beta = ldlt.solve(szy);
      estimate = mean[0] - beta.dot(mean.tail<2>());
      residual_var = std::max(0.0, (co(0, 0) - beta.dot(szy)) / (n - 3.0));
    } else if (szz(0, 0) > 0.0) {
      const double beta = szy[0] / szz(0, 0);
      estimate = mean[0] - beta * mean[1];
      residual_var = std::max(0.0, (co(0, 0) - beta * szy[0]) / (n - 2.0));
    }
  }
  out.mean = estimate;
  out.bias_est = estimate - truth;
  out.bias_ci_halfwidth = 1.959963984540054 * std::sqrt(residual_var / n);
  return out;
}

std::vector<double> estimation_error_curve(ExtrapolationOrder order, const ScalarQuery& q, double s,
                                           const Distribution& base, int m, const std::vector<std::size_t>& checkpoints,
                                           const RngStream& rng, std::optional<double> true_value, DrawMode mode) {
  const double truth = resolve_true_value(q, s, base, true_value);
  const SampleAverage avg{base, m};
  std::vector<double> errors;
  errors.reserve(checkpoints.size());
  double sum = 0.0;
  std::size_t done = 0;
  for (std::size_t target : checkpoints) {
    require(target >= done, "checkpoints must be nondecreasing");
    for (; done < target; ++done) {
      RngStream rep_rng = rng.substream(done);
      sum += extrapolate(order, q, s, avg, rep_rng, mode);
    }
    errors.push_back(done == 0 ? std::abs(truth) : std::abs(sum / static_cast<double>(done) - truth));
  }
  return errors;
}

// ---------------------------------------------------------------- test functions

namespace testfn {

double triangle_wave(double x) { return 2.0 * std::abs(2.0 * (x / 2.0 - std::floor(x / 2.0 + 0.5))) - 1.0; }

ScalarQuery half_square() {
  return [](double x) { return 0.5 * x * x; };
}

ScalarQuery quartic() {
  return [](double x) {
    const double x2 = x * x;
    return x2 * x2;
  };
}

ScalarQuery relu() {
  return [](double x) { return x > 0.0 ? x : 0.0; };
}

ScalarQuery perturbed_quadratic() {
  return [](double x) { return 0.5 * x * x + triangle_wave(x) + 1.0; };
}

}  // namespace testfn

}  // namespace cso
