#include "hncf/kernels.hpp"

#include <omp.h>

#include <cstdint>

namespace hncf::kernels {

namespace {

using idx = std::int64_t;

bool use_parallel(std::size_t work) {
  return work >= kParallelWorkThreshold && omp_get_max_threads() > 1;
}

// Maps an input coordinate back to the output coordinate whose window places
// kernel tap `k` on it; false when no output position does.
inline bool source_of(std::size_t in, std::size_t k, const Conv2dGeometry& g, std::size_t out_extent,
                      std::size_t& out) {
  const idx t = static_cast<idx>(in + g.pad) - static_cast<idx>(k);
  if (t < 0 || t % static_cast<idx>(g.stride) != 0) return false;
  out = static_cast<std::size_t>(t) / g.stride;
  return out < out_extent;
}

inline bool tap(std::size_t out, std::size_t k, const Conv2dGeometry& g, std::size_t in_extent,
                std::size_t& in) {
  const idx t = static_cast<idx>(out * g.stride + k) - static_cast<idx>(g.pad);
  if (t < 0 || t >= static_cast<idx>(in_extent)) return false;
  in = static_cast<std::size_t>(t);
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference kernels

namespace serial {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[p * m + i];
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* out = output.data() + (oy * ow + ox) * g.out_c;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        std::size_t iy;
        if (!tap(oy, ky, g, g.in_h, iy)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t ix;
          if (!tap(ox, kx, g, g.in_w, ix)) continue;
          const double* in = input.data() + (iy * g.in_w + ix) * g.in_c;
          const double* kern = kernel.data() + (ky * g.k_w + kx) * g.in_c * g.out_c;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double v = in[ci];
            const double* krow = kern + ci * g.out_c;
            for (std::size_t co = 0; co < g.out_c; ++co) out[co] += v * krow[co];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t iy = 0; iy < g.in_h; ++iy) {
    for (std::size_t ix = 0; ix < g.in_w; ++ix) {
      double* gin = grad_in.data() + (iy * g.in_w + ix) * g.in_c;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        std::size_t oy;
        if (!source_of(iy, ky, g, oh, oy)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t ox;
          if (!source_of(ix, kx, g, ow, ox)) continue;
          const double* gout = grad_out.data() + (oy * ow + ox) * g.out_c;
          const double* kern = kernel.data() + (ky * g.k_w + kx) * g.in_c * g.out_c;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double* krow = kern + ci * g.out_c;
            double s = 0.0;
            for (std::size_t co = 0; co < g.out_c; ++co) s += gout[co] * krow[co];
            gin[ci] += s;
          }
        }
      }
    }
  }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t ky = 0; ky < g.k_h; ++ky) {
    for (std::size_t kx = 0; kx < g.k_w; ++kx) {
      for (std::size_t ci = 0; ci < g.in_c; ++ci) {
        double* gk = grad_kernel.data() + ((ky * g.k_w + kx) * g.in_c + ci) * g.out_c;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          std::size_t iy;
          if (!tap(oy, ky, g, g.in_h, iy)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            std::size_t ix;
            if (!tap(ox, kx, g, g.in_w, ix)) continue;
            const double v = input[(iy * g.in_w + ix) * g.in_c + ci];
            const double* gout = grad_out.data() + (oy * ow + ox) * g.out_c;
            for (std::size_t co = 0; co < g.out_c; ++co) gk[co] += v * gout[co];
          }
        }
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t c = 0; c < g.channels; ++c) {
        std::size_t best = ((oy * g.stride) * g.in_w + ox * g.stride) * g.channels + c;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const std::size_t at =
                ((oy * g.stride + wy) * g.in_w + ox * g.stride + wx) * g.channels + c;
            if (input[at] > input[best]) best = at;
          }
        }
        const std::size_t o = (oy * ow + ox) * g.channels + c;
        output[o] = input[best];
        argmax[o] = best;
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels: same per-element arithmetic as above, split over outputs.

namespace parallel {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for collapse(2) schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    for (idx j = 0; j < static_cast<idx>(n); ++j) {
      const double* arow = a.data() + i * k;
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(m); ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (idx oy_ = 0; oy_ < static_cast<idx>(oh); ++oy_) {
    const auto oy = static_cast<std::size_t>(oy_);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* out = output.data() + (oy * ow + ox) * g.out_c;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        std::size_t iy;
        if (!tap(oy, ky, g, g.in_h, iy)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t ix;
          if (!tap(ox, kx, g, g.in_w, ix)) continue;
          const double* in = input.data() + (iy * g.in_w + ix) * g.in_c;
          const double* kern = kernel.data() + (ky * g.k_w + kx) * g.in_c * g.out_c;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double v = in[ci];
            const double* krow = kern + ci * g.out_c;
            for (std::size_t co = 0; co < g.out_c; ++co) out[co] += v * krow[co];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (idx iy_ = 0; iy_ < static_cast<idx>(g.in_h); ++iy_) {
    const auto iy = static_cast<std::size_t>(iy_);
    for (std::size_t ix = 0; ix < g.in_w; ++ix) {
      double* gin = grad_in.data() + (iy * g.in_w + ix) * g.in_c;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        std::size_t oy;
        if (!source_of(iy, ky, g, oh, oy)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t ox;
          if (!source_of(ix, kx, g, ow, ox)) continue;
          const double* gout = grad_out.data() + (oy * ow + ox) * g.out_c;
          const double* kern = kernel.data() + (ky * g.k_w + kx) * g.in_c * g.out_c;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double* krow = kern + ci * g.out_c;
            double s = 0.0;
            for (std::size_t co = 0; co < g.out_c; ++co) s += gout[co] * krow[co];
            gin[ci] += s;
          }
        }
      }
    }
  }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const idx taps = static_cast<idx>(g.k_h * g.k_w * g.in_c);
#pragma omp parallel for schedule(static)
  for (idx t = 0; t < taps; ++t) {
    const std::size_t ci = static_cast<std::size_t>(t) % g.in_c;
    const std::size_t kx = (static_cast<std::size_t>(t) / g.in_c) % g.k_w;
    const std::size_t ky = static_cast<std::size_t>(t) / (g.in_c * g.k_w);
    double* gk = grad_kernel.data() + static_cast<std::size_t>(t) * g.out_c;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      std::size_t iy;
      if (!tap(oy, ky, g, g.in_h, iy)) continue;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t ix;
        if (!tap(ox, kx, g, g.in_w, ix)) continue;
        const double v = input[(iy * g.in_w + ix) * g.in_c + ci];
        const double* gout = grad_out.data() + (oy * ow + ox) * g.out_c;
        for (std::size_t co = 0; co < g.out_c; ++co) gk[co] += v * gout[co];
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (idx oy_ = 0; oy_ < static_cast<idx>(oh); ++oy_) {
    const auto oy = static_cast<std::size_t>(oy_);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t c = 0; c < g.channels; ++c) {
        std::size_t best = ((oy * g.stride) * g.in_w + ox * g.stride) * g.channels + c;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const std::size_t at =
                ((oy * g.stride + wy) * g.in_w + ox * g.stride + wx) * g.channels + c;
            if (input[at] > input[best]) best = at;
          }
        }
        const std::size_t o = (oy * ow + ox) * g.channels + c;
        output[o] = input[best];
        argmax[o] = best;
      }
    }
  }
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// dispatch

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n) && m > 1) return parallel::matmul_nn(a, b, c, m, k, n);
  serial::matmul_nn(a, b, c, m, k, n);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n)) return parallel::matmul_nt(a, b, c, m, k, n);
  serial::matmul_nt(a, b, c, m, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n) && m > 1) return parallel::matmul_tn(a, b, c, m, k, n);
  serial::matmul_tn(a, b, c, m, k, n);
}

namespace {
std::size_t conv_work(const Conv2dGeometry& g) {
  return g.out_h() * g.out_w() * g.k_h * g.k_w * g.in_c * g.out_c;
}
}  // namespace

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output) {
  if (use_parallel(conv_work(g))) return parallel::conv2d_forward(g, input, kernel, output);
  serial::conv2d_forward(g, input, kernel, output);
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in) {
  if (use_parallel(conv_work(g))) return parallel::conv2d_backward_input(g, grad_out, kernel, grad_in);
  serial::conv2d_backward_input(g, grad_out, kernel, grad_in);
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel) {
  if (use_parallel(conv_work(g))) {
    return parallel::conv2d_backward_kernel(g, input, grad_out, grad_kernel);
  }
  serial::conv2d_backward_kernel(g, input, grad_out, grad_kernel);
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax) {
  if (use_parallel(g.out_h() * g.out_w() * g.channels * g.window * g.window)) {
    return parallel::maxpool_forward(g, input, output, argmax);
  }
  serial::maxpool_forward(g, input, output, argmax);
}

}  // namespace hncf::kernels
