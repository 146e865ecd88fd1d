#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace hncf {

// Seeded generator shared by every stochastic component. Draw sequences are
// reproducible for a fixed seed within one build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform01() < p; }
  std::uint64_t next_seed() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  // k distinct elements drawn uniformly without replacement, in draw order.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t k) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + index(pool.size() - i)]);
    }
    pool.resize(k);
    return pool;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hncf
