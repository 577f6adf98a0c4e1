#pragma once

#include <map>
#include <string>

#include "noisecnn/matrix.hpp"

namespace noisecnn {

struct AdadeltaState {
  Matrix mean_sq_grad;
  Matrix mean_sq_update;
};

/// One Adadelta update:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
/// State is lazily sized on first use.
void adadelta_step(Matrix& param, const Matrix& grad, AdadeltaState& state, double rho = 0.95,
                   double eps = 1e-6);

struct SgdState {
  Matrix velocity;
};

/// v <- momentum v + g; param -= lr v.
void sgd_step(Matrix& param, const Matrix& grad, SgdState& state, double lr, double momentum = 0.0);

enum class OptimizerKind { adadelta, sgd };
std::string optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adadelta;
  double rho = 0.95;
  double eps = 1e-6;
  double lr = 0.1;
  double momentum = 0.0;
};

/// Optimizer state keyed by parameter name.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}
  void step(const std::string& name, Matrix& param, const Matrix& grad);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::map<std::string, AdadeltaState> adadelta_;
  std::map<std::string, SgdState> sgd_;
};

}  // namespace noisecnn
