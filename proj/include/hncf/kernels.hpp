#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Dense numeric kernels behind the autodiff ops.
//
// Each kernel exists twice: a plain serial loop nest in `serial::` and an
// OpenMP version in `parallel::`. The parallel versions split work only over
// output elements and keep the serial per-element accumulation order, so both
// produce bitwise-identical results. The unqualified dispatchers pick the
// parallel path once the work is large enough to amortize a thread team.
//
// All kernels ACCUMULATE into their output (out += ...); callers zero it first
// when they want a plain product.
namespace hncf::kernels {

struct Conv2dGeometry {
  std::size_t in_h, in_w, in_c;
  std::size_t k_h, k_w, out_c;
  std::size_t stride, pad;

  std::size_t out_h() const { return (in_h + 2 * pad - k_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - k_w) / stride + 1; }
};

struct PoolGeometry {
  std::size_t in_h, in_w, channels;
  std::size_t window, stride;

  std::size_t out_h() const { return (in_h - window) / stride + 1; }
  std::size_t out_w() const { return (in_w - window) / stride + 1; }
};

namespace serial {

// C[m×n] += A[m×k] · B[k×n]
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// C[m×n] += A[m×k] · B[n×k]ᵀ
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// C[m×n] += A[k×m]ᵀ · B[k×n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel);

// Writes the window maxima and, per output element, the flat input index of the
// first row-major maximum. Output is overwritten, not accumulated.
void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax);

}  // namespace serial

namespace parallel {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel);

void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax);

}  // namespace parallel

// Multiply-add count above which the dispatchers use the parallel kernels.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_out, std::span<double> grad_kernel);
void maxpool_forward(const PoolGeometry& g, std::span<const double> input,
                     std::span<double> output, std::span<std::size_t> argmax);

}  // namespace hncf::kernels
