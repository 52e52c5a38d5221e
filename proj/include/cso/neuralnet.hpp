#pragma once

#include <span>
#include <vector>

#include "cso/common.hpp"
#include "cso/sampling.hpp"

namespace cso {

/// Dense feedforward net R -> R with tanh hidden layers and a linear output.
/// Weights are stored flat, layer by layer: the row-major (out x in) matrix
/// followed by the out-dimensional bias.
struct NetSpec {
  std::vector<int> layer_widths{1, 40, 40, 1};

  void validate() const;
  std::size_t parameter_count() const;
};

/// Uniform in +-1/sqrt(fan_in), biases included.
Vector init_weights(const NetSpec& spec, RngStream& rng);

double forward(const NetSpec& spec, const Vector& weights, double t);

struct SineData {
  double amplitude = 1.0;
  double phase = 0.0;
  std::span<const double> inputs;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// 1/2 * mean_t (A sin(t - phase) - net(t))^2 and its exact gradient.
LossGrad loss_and_grad(const NetSpec& spec, const Vector& weights, const SineData& data);
double loss_only(const NetSpec& spec, const Vector& weights, const SineData& data);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n, double lr = 1e-3);
};

/// Bias-corrected Adam. Returns the increment to add to the weights.
Vector adam_step(AdamState& state, const Vector& grad);

}  // namespace cso
