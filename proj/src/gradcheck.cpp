#include "noisecnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "noisecnn/rng.hpp"

namespace noisecnn {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-10) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<double()>& f, std::span<const GradBlock> blocks,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  auto eval = [&f] {
    const double v = f();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: objective is not finite");
    return v;
  };

  GradCheckReport report;
  Rng rng(options.seed);
  for (const auto& block : blocks) {
    if (block.value == nullptr || block.analytic == nullptr) {
      throw std::invalid_argument("grad_check: block '" + block.name + "' is missing data");
    }
    require_same_shape(*block.value, *block.analytic, "grad_check");

    std::vector<std::size_t> coords(block.value->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_block != 0 && options.coords_per_block < coords.size()) {
      rng.shuffle(coords);
      coords.resize(options.coords_per_block);
      std::sort(coords.begin(), coords.end());
    }

    Matrix& theta = *block.value;
    for (std::size_t i : coords) {
      const double saved = theta[i];
      theta[i] = saved + options.step;
      const double up = eval();
      theta[i] = saved - options.step;
      const double down = eval();
      theta[i] = saved;

      GradCheckEntry e{block.name, i, (*block.analytic)[i], (up - down) / (2.0 * options.step), 0.0};
      e.rel_error = relative_error(e.analytic, e.numeric);
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      report.entries.push_back(std::move(e));
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace noisecnn
