#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>

#include "coherence/graph.hpp"
#include "coherence/params.hpp"

namespace coherence {

using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double tolerance = 1e-4;

  bool passed() const { return max_relative_error < tolerance; }
};

// Central differences carry about ulp(loss)/epsilon of rounding noise (~1e-10
// at epsilon 1e-5), so the relative-error denominator is floored here.
inline constexpr double kGradCheckFloor = 1e-5;

// Compares reverse-mode gradients against central differences
//   |analytic - numeric| / max(|analytic| + |numeric|, kGradCheckFloor)
// over `samples` coordinates drawn uniformly from all parameters (every
// coordinate when samples == 0). `params` is perturbed in place and restored.
GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, double epsilon = 1e-5,
                           double tolerance = 1e-4, std::size_t samples = 0,
                           std::uint64_t seed = 0);

}  // namespace coherence
