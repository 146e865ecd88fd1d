#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hncf/rng.hpp"
#include "hncf/tensor.hpp"

// Differentiable primitives. Every op computes its result eagerly and, when the
// tape is recording and some input requires grad, records a backward rule that
// accumulates into the inputs' gradient buffers.
namespace hncf::ops {

enum class Mode { Train, Eval };

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kProbabilityClamp = 1e-12;

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& x);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
// Adds `bias` (length = last extent of x) to every trailing slice of x.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor sum(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);
Tensor layernorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::size_t axis);

// input [H×W×Cin], kernels [kh×kw×Cin×Cout] -> [H'×W'×Cout]; cross-correlation
// over the zero-padded input.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);
Tensor maxpool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride);

// Inverted dropout. Eval mode and rate 0 are the identity and draw nothing.
Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, Rng* rng);

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const std::size_t> ids);
Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);

// Mean binary cross-entropy with probabilities clamped to [1e-12, 1-1e-12].
Tensor bce_loss(Tape& tape, const Tensor& probabilities, const Tensor& labels);

}  // namespace hncf::ops
