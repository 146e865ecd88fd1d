#include "hncf/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "hncf/error.hpp"

namespace hncf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NotOnTape: return "NotOnTape";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::ExhaustedCandidates: return "ExhaustedCandidates";
    case ErrorKind::EmptyCases: return "EmptyCases";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::CorruptDirectory: return "CorruptDirectory";
  }
  return "Unknown";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "x" : "") << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; })) {
    fail(ErrorKind::InvalidParam, "tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    fail(ErrorKind::ShapeMismatch, "shape " + shape_to_string(shape) + " needs " +
                                       std::to_string(shape_size(shape)) + " values, got " +
                                       std::to_string(values.size()));
  }
  storage_->shape = std::move(shape);
  storage_->values = std::move(values);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return storage_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    fail(ErrorKind::InvalidParam, "axis " + std::to_string(axis) + " out of range for " +
                                      shape_to_string(shape()));
  }
  return storage_->shape[axis];
}

std::size_t Tensor::size() const { return storage_->values.size(); }

std::span<const double> Tensor::values() const { return storage_->values; }
std::span<double> Tensor::mutable_values() const { return storage_->values; }

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorKind::ShapeMismatch, "item() on non-scalar " + shape_to_string(shape()));
  }
  return storage_->values[0];
}

bool Tensor::requires_grad() const { return storage_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  storage_->requires_grad = on;
  if (on) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  } else {
    storage_->grad.clear();
    storage_->grad.shrink_to_fit();
  }
}

bool Tensor::has_grad() const { return !storage_->grad.empty(); }
std::span<const double> Tensor::grad() const { return storage_->grad; }
std::span<double> Tensor::mutable_grad() const { return storage_->grad; }

void Tensor::zero_grad() const { std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0); }

Tensor Tensor::clone() const { return Tensor(shape(), storage_->values, false); }

Tape Tape::inference() {
  Tape t;
  t.recording_ = false;
  return t;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorKind::ShapeMismatch, "backward() needs a scalar loss");
  }
  const auto producer = std::find_if(nodes_.rbegin(), nodes_.rend(),
                                     [&](const Node& n) { return n.output.id() == loss.id(); });
  if (producer == nodes_.rend()) {
    fail(ErrorKind::NotOnTape, "loss was not produced by an op recorded on this tape");
  }
  if (consumed_) {
    fail(ErrorKind::InvalidParam, "backward() already ran on this tape");
  }
  consumed_ = true;
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  // Ops recorded after the loss cannot influence it.
  for (auto it = producer; it != nodes_.rend(); ++it) {
    it->backward();
  }
}

}  // namespace hncf
