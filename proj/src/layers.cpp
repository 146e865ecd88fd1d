#include "hncf/layers.hpp"

#include <cmath>

namespace hncf {

namespace init {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(std::move(shape), -limit, limit, rng);
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& e : v) e = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace init

DenseLayer DenseLayer::create(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  DenseLayer d{init::glorot_uniform({in, out}, in, out, rng), Tensor()};
  if (with_bias) d.bias = Tensor::zeros({out}, true);
  return d;
}

Tensor DenseLayer::apply(Tape& tape, const Tensor& x) const {
  const Tensor y = ops::matmul(tape, x, weight);
  return bias.defined() ? ops::add_bias(tape, y, bias) : y;
}

void DenseLayer::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNormParams LayerNormParams::create(std::size_t width) {
  return LayerNormParams{Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

Tensor LayerNormParams::apply(Tape& tape, const Tensor& x) const {
  return ops::layernorm(tape, x, gamma, beta, x.rank() - 1);
}

void LayerNormParams::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void set_trainable(const ParameterList& params, bool trainable) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(trainable);
  }
}

}  // namespace hncf
