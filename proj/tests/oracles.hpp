#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library: plain index arithmetic, no kernels, no tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& gen, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

// C = A[m×k] · B[k×n]
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// input [H×W×Cin], kernel [kh×kw×Cin×Cout] -> [H'×W'×Cout], zero padding.
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t h, std::size_t w,
                                  std::size_t cin, const std::vector<double>& ker, std::size_t kh,
                                  std::size_t kw, std::size_t cout, std::size_t stride,
                                  std::size_t pad, std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(oh * ow * cout, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t co = 0; co < cout; ++co) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < kh; ++dy)
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const long iy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
            const long ix = static_cast<long>(x * stride + dx) - static_cast<long>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci)
              s += in[(iy * w + ix) * cin + ci] * ker[((dy * kw + dx) * cin + ci) * cout + co];
          }
        out[(y * ow + x) * cout + co] = s;
      }
  return out;
}

inline std::vector<double> maxpool(const std::vector<double>& in, std::size_t h, std::size_t w,
                                   std::size_t c, std::size_t window, std::size_t stride,
                                   std::size_t& oh, std::size_t& ow) {
  oh = (h - window) / stride + 1;
  ow = (w - window) / stride + 1;
  std::vector<double> out(oh * ow * c);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx)
            best = std::max(best, in[((y * stride + dy) * w + x * stride + dx) * c + ch]);
        out[(y * ow + x) * c + ch] = best;
      }
  return out;
}

struct Counts {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
};

inline Counts confusion(const std::vector<double>& p, const std::vector<int>& y, double threshold) {
  Counts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pred = !(p[i] < threshold);
    if (y[i] == 1) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

inline double recall(const Counts& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

// Sorts (score, id) descending by score, ascending id on ties, and reports
// whether the held-out id lands in the first k slots.
inline bool hit(std::vector<std::pair<double, std::size_t>> ranked, std::size_t held_out, std::size_t k) {
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (ranked[i].second == held_out) return true;
  return false;
}

}  // namespace oracle
