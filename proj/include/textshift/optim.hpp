#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace textshift {

enum class OptimizerKind { Adadelta, Sgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adadelta;
  double rho = 0.95;
  double epsilon = 1e-6;
  double learning_rate = 0.1;  // sgd only

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// One Adadelta update in place:
///   acc_grad   <- rho * acc_grad + (1 - rho) * g^2
///   step       <- -sqrt(acc_update + eps) / sqrt(acc_grad + eps) * g
///   acc_update <- rho * acc_update + (1 - rho) * step^2
///   param      <- param + step
void adadelta_step(std::span<double> params, std::span<const double> grads,
                   std::span<double> acc_grad, std::span<double> acc_update, double rho,
                   double epsilon);

/// Per-block accumulators for a list of parameter blocks. Empty for SGD.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<std::vector<double>> acc_grad;
  std::vector<std::vector<double>> acc_update;

  static OptimizerState for_blocks(const OptimizerConfig& config,
                                   const std::vector<std::span<double>>& blocks);

  /// Applies one update to every block; shapes must match the blocks the
  /// state was created for (ShapeMismatch otherwise).
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<double>>& grads);

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

}  // namespace textshift
