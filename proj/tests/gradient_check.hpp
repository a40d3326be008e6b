#pragma once

// Central finite-difference check of the BiLSTM + head gradients.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "revlab/neural/network.hpp"
#include "support.hpp"

namespace testing {

struct GradientCase {
  int d = 0;
  int h = 0;
  int max_len = 0;
  std::size_t batch = 0;
};

inline GradientCase random_case(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  return {pick(1, 8), pick(1, 8), pick(1, 6), static_cast<std::size_t>(pick(1, 3))};
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// Largest relative error over every parameter of a random model on a random batch.
inline double max_gradient_error(const GradientCase& c, std::mt19937_64& rng, double step = 1e-5) {
  using namespace revlab::neural;
  auto lstm = BiLstmParams::random(c.d, c.h, rng);
  auto head = HeadParams::random(c.h, rng);
  std::vector<Example> examples;
  for (std::size_t i = 0; i < c.batch; ++i) {
    const int valid = std::uniform_int_distribution<int>(1, c.max_len)(rng);
    examples.push_back({"x", random_pair(c.d, valid, c.max_len, rng), static_cast<double>(rng() % 2)});
  }
  std::vector<const Example*> batch;
  for (const auto& e : examples) batch.push_back(&e);

  const auto trace = forward_batch(batch, lstm, head);
  const auto grads = backward(trace, lstm, head);

  double worst = 0.0;
  auto sweep = [&](std::vector<std::span<double>> params, std::vector<std::span<const double>> analytic) {
    for (std::size_t b = 0; b < params.size(); ++b)
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        double& p = params[b][i];
        const double keep = p;
        p = keep + step;
        const double up = batch_loss(batch, lstm, head);
        p = keep - step;
        const double down = batch_loss(batch, lstm, head);
        p = keep;
        worst = std::max(worst, relative_error(analytic[b][i], (up - down) / (2 * step)));
      }
  };
  sweep(parameter_blocks(lstm), parameter_blocks(grads.lstm));
  sweep(parameter_blocks(head), parameter_blocks(grads.head));
  return worst;
}

}  // namespace testing
