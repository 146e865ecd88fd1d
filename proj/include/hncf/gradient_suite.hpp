#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hncf {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradSuiteEntry {
  std::string name;
  double max_relative_error = 0.0;
  bool passed() const { return max_relative_error <= kGradCheckTolerance; }
};

// Finite-difference checks of every differentiable primitive plus each model
// variant at a tiny size (one text block, H=8, two heads, 8×8×3 images,
// fusion [8], dropout off). Inputs are drawn from `seed`; relu and maxpool
// inputs are kept away from their kinks.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed);

}  // namespace hncf
