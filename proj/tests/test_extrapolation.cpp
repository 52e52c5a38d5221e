#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cso/extrapolation.hpp"

using namespace cso;

TEST_CASE("third-order combination coefficients") {
  double sum = 0.0, inv1 = 0.0, inv2 = 0.0, inv3 = 0.0;
  for (const auto& [j, c] : kThirdOrderCombination) {
    sum += c;
    inv1 += c / j;
    inv2 += c / (j * j);
    inv3 += c / (j * j * j);
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(inv2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(inv3 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(inv1 == doctest::Approx(1.0 / 18.0));
}

TEST_CASE("operators are exact on a point mass") {
  RngStream rng(1);
  const SampleAverage avg{Distribution::degenerate(0.7), 3};
  const auto q = testfn::quartic();
  for (int k = 1; k <= 3; ++k)
    CHECK(extrapolate(order_from_int(k), q, 0.2, avg, rng) == doctest::Approx(std::pow(0.9, 4)).epsilon(1e-12));
}

TEST_CASE("second-order stencil weights") {
  Stencil<double> st;
  append_second_order(st, 1.0, 1.0, 3.0);
  REQUIRE(st.size() == 3);
  CHECK(st[0].weight == 2.0);
  CHECK(st[0].offset == 2.0);
  CHECK(st[1].weight == -0.5);
  CHECK(st[2].weight == -0.5);
}

TEST_CASE("base draws per application") {
  CHECK(base_draws_per_application(ExtrapolationOrder::first, 3) == 3);
  CHECK(base_draws_per_application(ExtrapolationOrder::second, 3) == 6);
  CHECK(base_draws_per_application(ExtrapolationOrder::third, 1) == 32);
  CHECK(base_draws_per_application(ExtrapolationOrder::third, 1, DrawMode::shared_pool) == 12);
}

TEST_CASE("order-1 bias of s^2/2 under Normal(10, 100) is half the variance") {
  const auto r = measure_bias_and_variance(ExtrapolationOrder::first, testfn::half_square(), 0.0,
                                           Distribution::normal(10.0, 100.0), 1, 200000, RngStream(5));
  CHECK(std::abs(r.bias_est - 50.0) < 3.0 * r.bias_ci_halfwidth + 1e-9);
  CHECK(r.bias_ci_halfwidth < 1.0);
}

TEST_CASE("order-2 bias of the quartic under the ramp law") {
  // Bias of q(mean of m draws) is A/m + B/m^2 + C/m^3 with A = 6 mu^2 s2,
  // B = 4 mu s3 + 3 s2^2, C = s4 - 3 s2^2; the second-order operator leaves
  // -B/(2 m^2) - 3C/(4 m^3).
  const double mu = 4.0 / 3.0, s2 = 2.0 / 9.0, s3 = -8.0 / 135.0, s4 = 16.0 / 135.0;
  const double B = 4 * mu * s3 + 3 * s2 * s2, C = s4 - 3 * s2 * s2;
  MeasureOptions opts;
  opts.control_variate = true;
  for (int m : {1, 2}) {
    const double expected = -B / (2.0 * m * m) - 3.0 * C / (4.0 * m * m * m);
    const auto r = measure_bias_and_variance(ExtrapolationOrder::second, testfn::quartic(), 0.0, Distribution::ramp(),
                                             m, 200000, RngStream(6), opts);
    CHECK(std::abs(r.bias_est - expected) < 4.0 * r.bias_ci_halfwidth);
  }
}

TEST_CASE("control variate keeps the estimate unbiased and narrows the interval") {
  MeasureOptions cv;
  cv.control_variate = true;
  const auto plain = measure_bias_and_variance(ExtrapolationOrder::first, testfn::quartic(), 0.0, Distribution::ramp(),
                                               1, 100000, RngStream(8));
  const auto reduced = measure_bias_and_variance(ExtrapolationOrder::first, testfn::quartic(), 0.0,
                                                 Distribution::ramp(), 1, 100000, RngStream(8), cv);
  CHECK(reduced.bias_ci_halfwidth < 0.5 * plain.bias_ci_halfwidth);
  CHECK(std::abs(reduced.bias_est - 176.0 / 81.0) < 4.0 * reduced.bias_ci_halfwidth);
}

TEST_CASE("shared pool and independent draws agree in expectation") {
  const auto a = measure_bias_and_variance(ExtrapolationOrder::third, testfn::half_square(), 0.0,
                                           Distribution::normal(1.0, 4.0), 1, 50000, RngStream(2));
  MeasureOptions pooled;
  pooled.mode = DrawMode::shared_pool;
  const auto b = measure_bias_and_variance(ExtrapolationOrder::third, testfn::half_square(), 0.0,
                                           Distribution::normal(1.0, 4.0), 1, 50000, RngStream(2), pooled);
  CHECK(std::abs(a.bias_est) < 4.0 * a.bias_ci_halfwidth);
  CHECK(std::abs(b.bias_est) < 4.0 * b.bias_ci_halfwidth);
  CHECK(b.base_draws == 12u * 50000u);
}

TEST_CASE("error curve checkpoints must not decrease") {
  CHECK_THROWS_AS(estimation_error_curve(ExtrapolationOrder::first, testfn::relu(), 0.0,
                                         Distribution::normal(0.0, 1.0), 1, {10, 5}, RngStream(0)),
                  ParameterError);
}

TEST_CASE("triangle wave") {
  CHECK(testfn::triangle_wave(0.0) == doctest::Approx(-1.0));
  CHECK(testfn::triangle_wave(1.0) == doctest::Approx(1.0));
  CHECK(testfn::triangle_wave(2.0) == doctest::Approx(-1.0));
  CHECK(testfn::triangle_wave(0.5) == doctest::Approx(0.0));
}
