#include "noisecnn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace noisecnn {

void adadelta_step(Matrix& param, const Matrix& grad, AdadeltaState& state, double rho, double eps) {
  require_same_shape(param, grad, "adadelta_step");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("adadelta_step: rho must lie in (0, 1)");
  if (state.mean_sq_grad.empty()) {
    state.mean_sq_grad = Matrix(param.rows(), param.cols());
    state.mean_sq_update = Matrix(param.rows(), param.cols());
  }
  require_same_shape(param, state.mean_sq_grad, "adadelta_step state");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& eg = state.mean_sq_grad[i];
    double& ex = state.mean_sq_update[i];
    eg = rho * eg + (1.0 - rho) * g * g;
    const double dx = -std::sqrt(ex + eps) / std::sqrt(eg + eps) * g;
    ex = rho * ex + (1.0 - rho) * dx * dx;
    param[i] += dx;
  }
}

void sgd_step(Matrix& param, const Matrix& grad, SgdState& state, double lr, double momentum) {
  require_same_shape(param, grad, "sgd_step");
  if (state.velocity.empty()) state.velocity = Matrix(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    double& v = state.velocity[i];
    v = momentum * v + grad[i];
    param[i] -= lr * v;
  }
}

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::adadelta ? "adadelta" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adadelta") return OptimizerKind::adadelta;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adadelta|sgd)");
}

void Optimizer::step(const std::string& name, Matrix& param, const Matrix& grad) {
  if (config_.kind == OptimizerKind::adadelta) {
    adadelta_step(param, grad, adadelta_[name], config_.rho, config_.eps);
  } else {
    sgd_step(param, grad, sgd_[name], config_.lr, config_.momentum);
  }
}

}  // namespace noisecnn
