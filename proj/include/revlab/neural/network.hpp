#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "revlab/neural/embedding.hpp"

namespace revlab::neural {

/// One LSTM direction. `weights` is 4h x (d+h): row blocks are the input, forget, output and
/// candidate gates (in that order); the first d columns read the token, the last h the previous
/// hidden state.
struct LstmCell {
  Matrix weights;
  Vector bias;

  bool operator==(const LstmCell& o) const { return weights == o.weights && bias == o.bias; }
};

struct BiLstmParams {
  int input_dim = 0;
  int hidden_dim = 0;
  LstmCell forward;
  LstmCell backward;

  static BiLstmParams zeros(int input_dim, int hidden_dim);
  /// Uniform(-1/sqrt(h), 1/sqrt(h)) for every weight and bias.
  static BiLstmParams random(int input_dim, int hidden_dim, std::mt19937_64& rng);

  bool operator==(const BiLstmParams&) const = default;
};

/// Dense layer over the 2h BiLSTM features followed by a sigmoid.
struct HeadParams {
  Vector weights;
  double bias = 0.0;

  static HeadParams zeros(int hidden_dim);
  static HeadParams random(int hidden_dim, std::mt19937_64& rng);

  bool operator==(const HeadParams& o) const { return weights == o.weights && bias == o.bias; }
};

inline constexpr double kProbabilityEpsilon = 1e-7;

double sigmoid(double x);

/// Concatenation of the forward direction's state after the last valid token and the backward
/// direction's state after position 0. Rows at or past valid_length are never read.
Vector bilstm_forward(const EncodedPair& x, const BiLstmParams& p);

double head_forward(const Vector& features, const HeadParams& p);

/// Binary cross-entropy with the probability clamped to [eps, 1 - eps].
double bce_loss(double prob, double label);

struct Example {
  std::string id;
  EncodedPair input;
  double label = 0.0;  // 1 = Desirable
};

/// Activations recorded for one direction, indexed by processing step: gates is 4h x L
/// (post-nonlinearity), cells and hidden are h x (L+1) with column 0 the zero initial state.
struct DirectionTrace {
  Matrix gates;
  Matrix cells;
  Matrix hidden;
};

/// Forward record for one example. `input` points into the batch it came from and must outlive
/// the trace.
struct ExampleTrace {
  const EncodedPair* input = nullptr;
  DirectionTrace forward;
  DirectionTrace backward;
  Vector features;
  double probability = 0.5;
  double label = 0.0;
};

struct BatchTrace {
  std::vector<ExampleTrace> items;
  double mean_loss = 0.0;
};

struct Gradients {
  BiLstmParams lstm;
  HeadParams head;
};

BatchTrace forward_batch(std::span<const Example* const> batch, const BiLstmParams& lstm, const HeadParams& head);

/// Exact gradients of the trace's mean loss with respect to every BiLSTM and head parameter.
Gradients backward(const BatchTrace& trace, const BiLstmParams& lstm, const HeadParams& head);

/// Mean loss of a batch without keeping a trace.
double batch_loss(std::span<const Example* const> batch, const BiLstmParams& lstm, const HeadParams& head);

/// Flat views over every trainable array, in a fixed order: forward weights, forward bias,
/// backward weights, backward bias; for heads: weights, bias.
std::vector<std::span<double>> parameter_blocks(BiLstmParams& p);
std::vector<std::span<double>> parameter_blocks(HeadParams& p);
std::vector<std::span<const double>> parameter_blocks(const BiLstmParams& p);
std::vector<std::span<const double>> parameter_blocks(const HeadParams& p);

}  // namespace revlab::neural
