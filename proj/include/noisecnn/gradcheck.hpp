#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "noisecnn/matrix.hpp"

namespace noisecnn {

/// A parameter block to verify: `value` is perturbed in place and restored.
struct GradBlock {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* analytic = nullptr;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-3;
  std::size_t coords_per_block = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;            // picks the sampled coordinates
};

struct GradCheckEntry {
  std::string block;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// |a - n| / max(|a|, |n|); zero when both are below 1e-10 in magnitude.
double relative_error(double analytic, double numeric);

/// Compares analytic gradients against central differences (f(θ+h) - f(θ-h)) / 2h.
/// `f` evaluates the scalar objective at the current parameter values.
GradCheckReport grad_check(const std::function<double()>& f, std::span<const GradBlock> blocks,
                           const GradCheckOptions& options = {});

}  // namespace noisecnn
