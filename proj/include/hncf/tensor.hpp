#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hncf {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Row-major n-dimensional array of doubles with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Values are treated
/// as immutable once an op has consumed them; only parameters (updated by the
/// optimizer) and grad-check perturbations write through mutable_values().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  std::span<double> mutable_values() const;
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  // Switching on allocates a zeroed gradient buffer; switching off releases it.
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  // Deep copy of shape and values; the copy does not require grad.
  Tensor clone() const;

  // Identity of the underlying storage, stable for the tensor's lifetime.
  const void* id() const noexcept { return storage_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse.
///
/// A tape is confined to one thread. A tape created with recording disabled
/// (Tape::inference()) runs every op forward-only: nothing is recorded and no
/// result requires grad.
class Tape {
 public:
  Tape() = default;
  static Tape inference();

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Records an op. `output` must already carry a gradient buffer.
  void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once, in
  // reverse order. Throws NotOnTape when `loss` was not produced on this tape.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace hncf
