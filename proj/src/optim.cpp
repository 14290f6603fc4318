#include "textshift/optim.hpp"

#include <cmath>

#include "textshift/error.hpp"

namespace textshift {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adadelta ? "adadelta" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adadelta") return OptimizerKind::Adadelta;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw Error(ErrorCode::InvalidConfig, "unknown optimizer '" + std::string(name) + "'");
}

void adadelta_step(std::span<double> params, std::span<const double> grads,
                   std::span<double> acc_grad, std::span<double> acc_update, double rho,
                   double epsilon) {
  if (grads.size() != params.size() || acc_grad.size() != params.size() ||
      acc_update.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adadelta buffers differ in length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    acc_grad[i] = rho * acc_grad[i] + (1.0 - rho) * g * g;
    const double step = -std::sqrt(acc_update[i] + epsilon) / std::sqrt(acc_grad[i] + epsilon) * g;
    acc_update[i] = rho * acc_update[i] + (1.0 - rho) * step * step;
    params[i] += step;
  }
}

OptimizerState OptimizerState::for_blocks(const OptimizerConfig& config,
                                          const std::vector<std::span<double>>& blocks) {
  OptimizerState state;
  state.config = config;
  if (config.kind == OptimizerKind::Adadelta) {
    for (const auto& b : blocks) {
      state.acc_grad.emplace_back(b.size(), 0.0);
      state.acc_update.emplace_back(b.size(), 0.0);
    }
  }
  return state;
}

void OptimizerState::step(const std::vector<std::span<double>>& params,
                          const std::vector<std::span<double>>& grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter and gradient block counts differ");
  }
  if (config.kind == OptimizerKind::Sgd) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (params[b].size() != grads[b].size()) {
        throw Error(ErrorCode::ShapeMismatch, "parameter and gradient block sizes differ");
      }
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        params[b][i] -= config.learning_rate * grads[b][i];
      }
    }
    return;
  }
  if (acc_grad.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state was built for a different model");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    adadelta_step(params[b], grads[b], acc_grad[b], acc_update[b], config.rho, config.epsilon);
  }
}

}  // namespace textshift
