// Serial vs OpenMP kernels at training-relevant sizes. Both paths produce
// identical bits, so only time differs.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hncf/kernels.hpp"

using namespace hncf::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

template <bool Parallel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    if constexpr (Parallel)
      parallel::matmul_nn(a, b, c, n, n, n);
    else
      serial::matmul_nn(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

// 3x3 same-padding conv over an image-encoder sized feature map
template <bool Parallel>
void bm_conv(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  Conv2dGeometry g{hw, hw, ch, 3, 3, ch, 1, 1};
  auto in = random_vec(hw * hw * ch, 3), k = random_vec(9 * ch * ch, 4);
  std::vector<double> out(g.out_h() * g.out_w() * ch);
  for (auto _ : state) {
    std::fill(out.begin(), out.end(), 0.0);
    if constexpr (Parallel)
      parallel::conv2d_forward(g, in, k, out);
    else
      serial::conv2d_forward(g, in, k, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * out.size() * 9 * ch);
}

template <bool Parallel>
void bm_conv_backward_kernel(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const auto ch = static_cast<std::size_t>(state.range(1));
  Conv2dGeometry g{hw, hw, ch, 3, 3, ch, 1, 1};
  auto in = random_vec(hw * hw * ch, 5), go = random_vec(g.out_h() * g.out_w() * ch, 6);
  std::vector<double> gk(9 * ch * ch);
  for (auto _ : state) {
    std::fill(gk.begin(), gk.end(), 0.0);
    if constexpr (Parallel)
      parallel::conv2d_backward_kernel(g, in, go, gk);
    else
      serial::conv2d_backward_kernel(g, in, go, gk);
    benchmark::DoNotOptimize(gk.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul<false>)->Name("matmul_nn/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<true>)->Name("matmul_nn/parallel")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_conv<false>)->Name("conv2d_forward/serial")->Args({32, 16})->Args({64, 32});
BENCHMARK(bm_conv<true>)->Name("conv2d_forward/parallel")->Args({32, 16})->Args({64, 32});
BENCHMARK(bm_conv_backward_kernel<false>)->Name("conv2d_backward_kernel/serial")->Args({32, 16})->Args({64, 32});
BENCHMARK(bm_conv_backward_kernel<true>)->Name("conv2d_backward_kernel/parallel")->Args({32, 16})->Args({64, 32});

BENCHMARK_MAIN();
