#include <doctest.h>

#include <cmath>
#include <vector>

#include "cso/neuralnet.hpp"

using namespace cso;

TEST_CASE("parameter count of the 1-40-40-1 net") {
  NetSpec spec;
  CHECK(spec.parameter_count() == 40 + 40 + 1600 + 40 + 40 + 1);
}

TEST_CASE("gradient matches central differences") {
  NetSpec spec;
  spec.layer_widths = {1, 5, 4, 1};
  RngStream rng(3);
  const Vector w = init_weights(spec, rng);
  const std::vector<double> t{-2.0, -0.3, 0.9, 4.1};
  const SineData data{1.7, 0.4, t};
  const LossGrad lg = loss_and_grad(spec, w, data);
  CHECK(lg.loss == doctest::Approx(loss_only(spec, w, data)));
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    Vector wp = w, wm = w;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (loss_only(spec, wp, data) - loss_only(spec, wm, data)) / (2 * h);
    CHECK(lg.grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
  }
}

TEST_CASE("zero weights predict zero") {
  NetSpec spec;
  const Vector w = Vector::Zero(static_cast<Eigen::Index>(spec.parameter_count()));
  CHECK(forward(spec, w, 1.3) == 0.0);
  const std::vector<double> t{0.5};
  const SineData data{2.0, 0.0, t};
  CHECK(loss_only(spec, w, data) == doctest::Approx(0.5 * std::pow(2.0 * std::sin(0.5), 2)));
}

TEST_CASE("first Adam step moves each coordinate by lr") {
  AdamState s = AdamState::zeros(3, 0.01);
  Vector g(3);
  g << 2.0, -0.5, 1e-3;
  const Vector step = adam_step(s, g);
  CHECK(step[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(step[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(step[2] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(s.step_count == 1);
}

TEST_CASE("invalid layer widths") {
  NetSpec spec;
  spec.layer_widths = {2, 4, 1};
  CHECK_THROWS_AS(spec.validate(), ParameterError);
}
