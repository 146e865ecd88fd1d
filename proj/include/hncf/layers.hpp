#pragma once

#include <string>
#include <vector>

#include "hncf/ops.hpp"
#include "hncf/rng.hpp"
#include "hncf/tensor.hpp"

namespace hncf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

namespace init {
// Glorot/Xavier uniform: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);
}  // namespace init

// y = x·W + b over the last axis of a [rows×in] input. The bias is optional
// (undefined tensor = no bias).
struct DenseLayer {
  Tensor weight;  // [in×out]
  Tensor bias;    // [out]

  static DenseLayer create(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor apply(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams create(std::size_t width);
  Tensor apply(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

void set_trainable(const ParameterList& params, bool trainable);

}  // namespace hncf
