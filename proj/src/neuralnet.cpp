#include "cso/neuralnet.hpp"

#include <cmath>

namespace cso {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Layer {
  Eigen::Map<const RowMajor> w;
  Eigen::Map<const Vector> b;
};

std::vector<Layer> view_layers(const NetSpec& spec, const Vector& weights) {
  if (static_cast<std::size_t>(weights.size()) != spec.parameter_count())
    throw ShapeError("weight vector has " + std::to_string(weights.size()) + " entries, net expects " +
                     std::to_string(spec.parameter_count()));
  std::vector<Layer> layers;
  const double* p = weights.data();
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    layers.push_back({Eigen::Map<const RowMajor>(p, out, in), Eigen::Map<const Vector>(p + out * in, out)});
    p += (in + 1) * out;
  }
  return layers;
}

}  // namespace

void NetSpec::validate() const {
  require(layer_widths.size() >= 3, "net needs at least one hidden layer");
  require(layer_widths.front() == 1 && layer_widths.back() == 1, "net maps R -> R");
  for (int w : layer_widths) require(w >= 1, "layer widths must be >= 1");
}

std::size_t NetSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
    n += static_cast<std::size_t>(layer_widths[l] + 1) * layer_widths[l + 1];
  return n;
}

Vector init_weights(const NetSpec& spec, RngStream& rng) {
  spec.validate();
  Vector w(static_cast<Eigen::Index>(spec.parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int j = 0; j < (in + 1) * out; ++j) w[k++] = bound * (2.0 * rng.uniform() - 1.0);
  }
  return w;
}

double forward(const NetSpec& spec, const Vector& weights, double t) {
  const auto layers = view_layers(spec, weights);
  Vector a(1);
  a[0] = t;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Vector z = layers[l].w * a + layers[l].b;
    a = l + 1 < layers.size() ? Vector(z.array().tanh()) : z;
  }
  return a[0];
}

LossGrad loss_and_grad(const NetSpec& spec, const Vector& weights, const SineData& data) {
  require(!data.inputs.empty(), "loss needs a non-empty dataset");
  const auto layers = view_layers(spec, weights);
  const std::size_t depth = layers.size();
  LossGrad out;
  out.grad = Vector::Zero(weights.size());
  std::vector<Vector> acts(depth + 1);
  const double scale = 1.0 / static_cast<double>(data.inputs.size());

  for (double t : data.inputs) {
    acts[0] = Vector::Constant(1, t);
    for (std::size_t l = 0; l < depth; ++l) {
      Vector z = layers[l].w * acts[l] + layers[l].b;
      acts[l + 1] = l + 1 < depth ? Vector(z.array().tanh()) : z;
    }
    const double residual = acts[depth][0] - data.amplitude * std::sin(t - data.phase);
    out.loss += 0.5 * residual * residual * scale;

    // Backward pass; delta is dLoss/dz for the current layer.
    Vector delta = Vector::Constant(1, residual * scale);
    Eigen::Index offset = weights.size();
    for (std::size_t l = depth; l-- > 0;) {
      const auto in = layers[l].w.cols();
      const auto outw = layers[l].w.rows();
      offset -= (in + 1) * outw;
      Eigen::Map<RowMajor> gw(out.grad.data() + offset, outw, in);
      gw.noalias() += delta * acts[l].transpose();
      out.grad.segment(offset + outw * in, outw) += delta;
      if (l > 0) {
        Vector back = layers[l].w.transpose() * delta;
        delta = back.array() * (1.0 - acts[l].array().square());
      }
    }
  }
  return out;
}

double loss_only(const NetSpec& spec, const Vector& weights, const SineData& data) {
  require(!data.inputs.empty(), "loss needs a non-empty dataset");
  double acc = 0.0;
  for (double t : data.inputs) {
    const double r = forward(spec, weights, t) - data.amplitude * std::sin(t - data.phase);
    acc += 0.5 * r * r;
  }
  return acc / static_cast<double>(data.inputs.size());
}

AdamState AdamState::zeros(Eigen::Index n, double lr) {
  AdamState s;
  s.first_moment = Vector::Zero(n);
  s.second_moment = Vector::Zero(n);
  s.lr = lr;
  return s;
}

Vector adam_step(AdamState& state, const Vector& grad) {
  if (grad.size() != state.first_moment.size()) throw ShapeError("adam: gradient size does not match state");
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const Vector m_hat = state.first_moment / c1;
  const Vector v_hat = state.second_moment / c2;
  return -state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

}  // namespace cso
