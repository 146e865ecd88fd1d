#include "hncf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hncf/error.hpp"
#include "hncf/kernels.hpp"

namespace hncf::ops {

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// Output tensor that requires grad only when the tape is recording and one of
// the inputs participates in differentiation.
Tensor make_output(const Tape& tape, Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs) {
  return Tensor(std::move(shape), std::move(values), tape.recording() && any_requires_grad(inputs));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::ShapeMismatch, std::string(op) + ": " + shape_to_string(a.shape()) + " vs " +
                                       shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    fail(ErrorKind::ShapeMismatch, std::string(op) + ": expected rank " + std::to_string(rank) +
                                       ", got " + shape_to_string(t.shape()));
  }
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    fail(ErrorKind::InvalidParam, std::string(op) + ": axis " + std::to_string(axis) +
                                      " invalid for " + shape_to_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

double stable_sigmoid(double x) {
  // Saturated results are pulled back inside the open interval (0, 1).
  constexpr double kHi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  constexpr double kLo = std::numeric_limits<double>::min();
  double y;
  if (x >= 0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, kLo, kHi);
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorKind::ShapeMismatch, "matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                                       " x " + shape_to_string(b.shape()));
  }
  std::vector<double> c(m * n, 0.0);
  kernels::matmul_nn(a.values(), b.values(), c, m, k, n);
  Tensor out = make_output(tape, {m, n}, std::move(c), {&a, &b});
  if (out.requires_grad()) {
    tape.record({a, b}, out, [a, b, out, m, k, n]() mutable {
      if (a.requires_grad()) kernels::matmul_nt(out.grad(), b.values(), a.mutable_grad(), m, n, k);
      if (b.requires_grad()) kernels::matmul_tn(a.values(), out.grad(), b.mutable_grad(), k, m, n);
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> v(r * c);
  const auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = xv[i * c + j];
  Tensor out = make_output(tape, {c, r}, std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out, r, c]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += go[j * r + i];
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  Tensor out = make_output(tape, a.shape(), std::move(v), {&a, &b});
  if (out.requires_grad()) {
    tape.record({a, b}, out, [a, b, out]() mutable {
      const auto go = out.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  Tensor out = make_output(tape, a.shape(), std::move(v), {&a, &b});
  if (out.requires_grad()) {
    tape.record({a, b}, out, [a, b, out]() mutable {
      const auto go = out.grad();
      const auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * av[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e *= factor;
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out, factor]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * factor;
    });
  }
  return out;
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.shape().back()) {
    fail(ErrorKind::ShapeMismatch, "add_bias: bias " + shape_to_string(bias.shape()) +
                                       " does not match trailing extent of " +
                                       shape_to_string(x.shape()));
  }
  const std::size_t n = bias.size(), rows = x.size() / n;
  std::vector<double> v(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) v[r * n + j] += bv[j];
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x, &bias});
  if (out.requires_grad()) {
    tape.record({x, bias}, out, [x, bias, out, rows, n]() mutable {
      const auto go = out.grad();
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
      }
      if (bias.requires_grad()) {
        auto g = bias.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) g[j] += go[r * n + j];
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out = make_output(tape, {1}, {s}, {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out]() mutable {
      const double go = out.grad()[0];
      for (double& g : x.mutable_grad()) g += go;
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    fail(ErrorKind::ShapeMismatch, "reshape: " + shape_to_string(x.shape()) + " to " +
                                       shape_to_string(shape));
  }
  Tensor out = make_output(tape, std::move(shape),
                           std::vector<double>(x.values().begin(), x.values().end()), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e = e > 0.0 ? e : 0.0;
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      const auto xv = x.values();
      for (std::size_t i = 0; i < go.size(); ++i)
        if (xv[i] > 0.0) g[i] += go[i];
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  std::vector<double> v(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = stable_sigmoid(xv[i]);
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      const auto y = out.values();
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  std::vector<double> v(x.size());
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.len; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - mx);
        v[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.len; ++j) v[base + j * s.inner] /= z;
    }
  }
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out, s]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      const auto y = out.values();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.len * s.inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < s.len; ++j) {
            const std::size_t at = base + j * s.inner;
            dot += go[at] * y[at];
          }
          for (std::size_t j = 0; j < s.len; ++j) {
            const std::size_t at = base + j * s.inner;
            g[at] += y[at] * (go[at] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor layernorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "layernorm");
  if (gamma.size() != s.len || beta.size() != s.len) {
    fail(ErrorKind::ShapeMismatch, "layernorm: gamma/beta length must be " + std::to_string(s.len));
  }
  const std::size_t slices = s.outer * s.inner;
  std::vector<double> xhat(x.size()), inv_std(slices), v(x.size());
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  const double n = static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mean = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) mean += xv[base + j * s.inner];
      mean /= n;
      double var = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) {
        const double d = xv[base + j * s.inner] - mean;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + kLayerNormEps);
      inv_std[o * s.inner + in] = is;
      for (std::size_t j = 0; j < s.len; ++j) {
        const std::size_t at = base + j * s.inner;
        xhat[at] = (xv[at] - mean) * is;
        v[at] = xhat[at] * gv[j] + bv[j];
      }
    }
  }
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x, &gamma, &beta});
  if (out.requires_grad()) {
    tape.record({x, gamma, beta}, out,
                [x, gamma, beta, out, s, n, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
                  const auto go = out.grad();
                  const auto gv = gamma.values();
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t in = 0; in < s.inner; ++in) {
                      const std::size_t base = o * s.len * s.inner + in;
                      if (gamma.requires_grad() || beta.requires_grad()) {
                        for (std::size_t j = 0; j < s.len; ++j) {
                          const std::size_t at = base + j * s.inner;
                          if (gamma.requires_grad()) gamma.mutable_grad()[j] += go[at] * xhat[at];
                          if (beta.requires_grad()) beta.mutable_grad()[j] += go[at];
                        }
                      }
                      if (!x.requires_grad()) continue;
                      double sum_d = 0.0, sum_dx = 0.0;
                      for (std::size_t j = 0; j < s.len; ++j) {
                        const std::size_t at = base + j * s.inner;
                        const double d = go[at] * gv[j];
                        sum_d += d;
                        sum_dx += d * xhat[at];
                      }
                      const double is = inv_std[o * s.inner + in];
                      auto g = x.mutable_grad();
                      for (std::size_t j = 0; j < s.len; ++j) {
                        const std::size_t at = base + j * s.inner;
                        const double d = go[at] * gv[j];
                        g[at] += is * (d - sum_d / n - xhat[at] * sum_dx / n);
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (stride < 1) fail(ErrorKind::InvalidParam, "conv2d: stride must be >= 1");
  if (kernels.dim(2) != input.dim(2)) {
    fail(ErrorKind::ShapeMismatch, "conv2d: input has " + std::to_string(input.dim(2)) +
                                       " channels, kernels expect " + std::to_string(kernels.dim(2)));
  }
  const kernels::Conv2dGeometry g{input.dim(0), input.dim(1), input.dim(2), kernels.dim(0),
                                  kernels.dim(1), kernels.dim(3), stride, padding};
  if (g.k_h > g.in_h + 2 * padding || g.k_w > g.in_w + 2 * padding) {
    fail(ErrorKind::InvalidParam, "conv2d: kernel larger than padded input");
  }
  std::vector<double> v(g.out_h() * g.out_w() * g.out_c, 0.0);
  kernels::conv2d_forward(g, input.values(), kernels.values(), v);
  Tensor out = make_output(tape, {g.out_h(), g.out_w(), g.out_c}, std::move(v), {&input, &kernels});
  if (out.requires_grad()) {
    tape.record({input, kernels}, out, [input, kernels, out, g]() mutable {
      if (input.requires_grad())
        kernels::conv2d_backward_input(g, out.grad(), kernels.values(), input.mutable_grad());
      if (kernels.requires_grad())
        kernels::conv2d_backward_kernel(g, input.values(), out.grad(), kernels.mutable_grad());
    });
  }
  return out;
}

Tensor maxpool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 3, "maxpool2d");
  if (window < 1 || stride < 1) fail(ErrorKind::InvalidParam, "maxpool2d: window and stride must be >= 1");
  if (window > input.dim(0) || window > input.dim(1)) {
    fail(ErrorKind::InvalidParam, "maxpool2d: window " + std::to_string(window) + " exceeds input " +
                                      shape_to_string(input.shape()));
  }
  const kernels::PoolGeometry g{input.dim(0), input.dim(1), input.dim(2), window, stride};
  const std::size_t n = g.out_h() * g.out_w() * g.channels;
  std::vector<double> v(n);
  std::vector<std::size_t> argmax(n);
  kernels::maxpool_forward(g, input.values(), v, argmax);
  Tensor out = make_output(tape, {g.out_h(), g.out_w(), g.channels}, std::move(v), {&input});
  if (out.requires_grad()) {
    tape.record({input}, out, [input, out, argmax = std::move(argmax)]() mutable {
      auto g = input.mutable_grad();
      const auto go = out.grad();
      for (std::size_t o = 0; o < go.size(); ++o) g[argmax[o]] += go[o];
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorKind::InvalidParam, "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) return x;
  if (rng == nullptr) fail(ErrorKind::InvalidParam, "dropout: train mode needs an rng");
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng->uniform01() < rate ? 0.0 : keep_scale;
  std::vector<double> v(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xv[i] * mask[i];
  Tensor out = make_output(tape, x.shape(), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out, mask = std::move(mask)]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * mask[i];
    });
  }
  return out;
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) fail(ErrorKind::InvalidParam, "embedding_lookup: no ids");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  std::vector<double> v(rows.size() * d);
  const auto tv = table.values();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= vocab) {
      fail(ErrorKind::IndexOutOfRange, "embedding id " + std::to_string(rows[r]) +
                                           " outside table of " + std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                v.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  Tensor out = make_output(tape, {rows.size(), d}, std::move(v), {&table});
  if (out.requires_grad()) {
    tape.record({table}, out, [table, out, d, rows = std::move(rows)]() mutable {
      auto g = table.mutable_grad();
      const auto go = out.grad();
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) g[rows[r] * d + j] += go[r * d + j];
    });
  }
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::InvalidParam, "concat: no parts");
  if (parts.size() == 1) return parts.front();
  const Shape& first = parts.front().shape();
  split_axis(first, axis, "concat");
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size()) fail(ErrorKind::ShapeMismatch, "concat: rank differs");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && p.dim(i) != first[i]) {
        fail(ErrorKind::ShapeMismatch, "concat: " + shape_to_string(p.shape()) + " vs " +
                                           shape_to_string(first) + " off axis " +
                                           std::to_string(axis));
      }
    }
    shape[axis] += p.dim(axis);
  }
  const AxisSplit out_split = split_axis(shape, axis, "concat");
  std::vector<double> v(shape_size(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * out_split.inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < out_split.outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  v.begin() + static_cast<std::ptrdiff_t>(o * out_split.len * out_split.inner +
                                                          offset * out_split.inner));
    }
    offset += p.dim(axis);
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out(std::move(shape), std::move(v), tape.recording() && needs_grad);
  if (out.requires_grad()) {
    tape.record(parts, out, [parts, out, out_split, offsets = std::move(offsets), axis]() mutable {
      const auto go = out.grad();
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& p = parts[pi];
        if (!p.requires_grad()) continue;
        auto g = p.mutable_grad();
        const std::size_t chunk = p.dim(axis) * out_split.inner;
        for (std::size_t o = 0; o < out_split.outer; ++o) {
          const std::size_t src = o * out_split.len * out_split.inner + offsets[pi] * out_split.inner;
          for (std::size_t j = 0; j < chunk; ++j) g[o * chunk + j] += go[src + j];
        }
      }
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > s.len) {
    fail(ErrorKind::IndexOutOfRange, "slice [" + std::to_string(start) + ", " +
                                         std::to_string(start + length) + ") outside extent " +
                                         std::to_string(s.len));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  const std::size_t chunk = length * s.inner;
  std::vector<double> v(s.outer * chunk);
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * s.len * s.inner + start * s.inner),
                chunk, v.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  }
  Tensor out = make_output(tape, std::move(shape), std::move(v), {&x});
  if (out.requires_grad()) {
    tape.record({x}, out, [x, out, s, start, chunk]() mutable {
      auto g = x.mutable_grad();
      const auto go = out.grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const std::size_t dst = o * s.len * s.inner + start * s.inner;
        for (std::size_t j = 0; j < chunk; ++j) g[dst + j] += go[o * chunk + j];
      }
    });
  }
  return out;
}

Tensor bce_loss(Tape& tape, const Tensor& probabilities, const Tensor& labels) {
  require_same_shape(probabilities, labels, "bce_loss");
  const auto pv = probabilities.values(), yv = labels.values();
  const double n = static_cast<double>(pv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (yv[i] != 0.0 && yv[i] != 1.0) {
      fail(ErrorKind::InvalidParam, "bce_loss: label " + std::to_string(yv[i]) + " at index " +
                                        std::to_string(i) + " is not binary");
    }
    const double p = std::clamp(pv[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= yv[i] * std::log(p) + (1.0 - yv[i]) * std::log(1.0 - p);
  }
  Tensor out = make_output(tape, {1}, {total / n}, {&probabilities});
  if (out.requires_grad()) {
    tape.record({probabilities, labels}, out, [probabilities, labels, out, n]() mutable {
      auto g = probabilities.mutable_grad();
      const double go = out.grad()[0];
      const auto pv = probabilities.values(), yv = labels.values();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        const double p = pv[i];
        if (p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp) continue;
        g[i] += go * (-yv[i] / p + (1.0 - yv[i]) / (1.0 - p)) / n;
      }
    });
  }
  return out;
}

}  // namespace hncf::ops
