#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace revlab::neural {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one group of parameter blocks.
struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  /// Fresh state whose moments are zero and shaped like `blocks`.
  static OptimizerState for_blocks(std::span<const std::span<const double>> blocks, const AdamConfig& config);
};

/// One bias-corrected adaptive-moment update applied in place:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2,
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Shapes are checked before anything is modified. A non-finite gradient throws TrainingError
/// naming the block and index, leaving parameters and state untouched.
void optimizer_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                    OptimizerState& state, std::span<const std::string> block_names = {});

}  // namespace revlab::neural
