#include "revlab/neural/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "revlab/error.hpp"

namespace revlab::neural {

OptimizerState OptimizerState::for_blocks(std::span<const std::span<const double>> blocks, const AdamConfig& config) {
  OptimizerState s;
  s.config = config;
  for (const auto& b : blocks) {
    s.first_moment.emplace_back(b.size(), 0.0);
    s.second_moment.emplace_back(b.size(), 0.0);
  }
  return s;
}

void optimizer_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                    OptimizerState& state, std::span<const std::string> block_names) {
  const auto& cfg = state.config;
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw ValidationError("optimizer: parameter, gradient and state block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size() ||
        params[b].size() != state.second_moment[b].size())
      throw ValidationError(fmt::format("optimizer: shape mismatch in block {}", b));
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        const std::string name = b < block_names.size() ? block_names[b] : fmt::format("#{}", b);
        throw TrainingError(fmt::format("non-finite gradient {} in block {} at index {} (step {})", grads[b][i],
                                        name, i, state.step + 1));
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[b][i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace revlab::neural
