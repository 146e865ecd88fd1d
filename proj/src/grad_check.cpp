#include "hncf/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "hncf/error.hpp"

namespace hncf {

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs,
                           double epsilon) {
  for (Tensor& x : inputs) {
    if (!x.requires_grad()) x.set_requires_grad(true);
    x.zero_grad();
  }
  {
    Tape tape;
    const Tensor loss = f(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const Tensor& x : inputs) analytic.emplace_back(x.grad().begin(), x.grad().end());

  auto evaluate = [&]() {
    Tape tape = Tape::inference();
    return f(tape).item();
  };

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto values = inputs[t].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + epsilon;
      const double plus = evaluate();
      values[i] = original - epsilon;
      const double minus = evaluate();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_relative_error || (t == 0 && i == 0)) {
        result = {err, t, i, a, numeric};
      }
    }
  }
  return result;
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x, double epsilon) {
  std::vector<Tensor> inputs{x};
  return grad_check([&](Tape& tape) { return f(tape, inputs.front()); }, inputs, epsilon)
      .max_relative_error;
}

}  // namespace hncf
