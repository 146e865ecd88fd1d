#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hncf/tensor.hpp"

namespace hncf {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients against central differences
//   (f(x + eps·e_i) - f(x - eps·e_i)) / 2eps
// for every coordinate of every tensor in `inputs`. The relative error of one
// coordinate is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// `f` builds a scalar on the tape it is given and must read the inputs through
// the captured handles (they are perturbed in place and restored afterwards).
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs,
                           double epsilon = 1e-5);

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                  double epsilon = 1e-5);

}  // namespace hncf
