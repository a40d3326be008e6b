#include "revlab/neural/network.hpp"

#include <cmath>

#include <fmt/format.h>

#include "revlab/error.hpp"

namespace revlab::neural {
namespace {

LstmCell zero_cell(int d, int h) { return {Matrix::Zero(4 * h, d + h), Vector::Zero(4 * h)}; }

LstmCell random_cell(int d, int h, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> u(-bound, bound);
  LstmCell c = zero_cell(d, h);
  // Column-major fill order keeps the draw sequence independent of Eigen internals.
  for (Eigen::Index j = 0; j < c.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < c.weights.rows(); ++i) c.weights(i, j) = u(rng);
  for (Eigen::Index i = 0; i < c.bias.size(); ++i) c.bias(i) = u(rng);
  return c;
}

void check_shapes(const EncodedPair& x, const BiLstmParams& p) {
  if (x.dimension() != p.input_dim)
    throw ValidationError(fmt::format("input dimension {} does not match BiLSTM input {}", x.dimension(), p.input_dim));
  if (x.valid_length < 1 || x.valid_length > x.max_length())
    throw ValidationError(fmt::format("valid_length {} outside [1, {}]", x.valid_length, x.max_length()));
}

DirectionTrace run_direction(const LstmCell& cell, const EncodedPair& x, int h, bool reverse) {
  const int L = x.valid_length;
  const int d = x.dimension();
  const Matrix input_part = cell.weights.leftCols(d) * x.tokens.topRows(L).transpose();
  DirectionTrace tr{Matrix(4 * h, L), Matrix::Zero(h, L + 1), Matrix::Zero(h, L + 1)};
  Vector z(4 * h);
  for (int s = 0; s < L; ++s) {
    const int t = reverse ? L - 1 - s : s;
    z.noalias() = input_part.col(t) + cell.bias;
    z.noalias() += cell.weights.rightCols(h) * tr.hidden.col(s);
    auto gates = tr.gates.col(s);
    for (int k = 0; k < 3 * h; ++k) gates(k) = sigmoid(z(k));
    for (int k = 3 * h; k < 4 * h; ++k) gates(k) = std::tanh(z(k));
    tr.cells.col(s + 1) = gates.segment(h, h).cwiseProduct(tr.cells.col(s)) +
                          gates.segment(0, h).cwiseProduct(gates.segment(3 * h, h));
    tr.hidden.col(s + 1) = gates.segment(2 * h, h).cwiseProduct(tr.cells.col(s + 1).array().tanh().matrix());
  }
  return tr;
}

void backprop_direction(const LstmCell& cell, const DirectionTrace& tr, const EncodedPair& x, int h, bool reverse,
                        const Vector& dh_final, LstmCell& grad) {
  const int L = x.valid_length;
  const int d = x.dimension();
  Matrix dz(4 * h, L);        // pre-activation gradients, column = token position
  Matrix prev_hidden(h, L);   // state fed into the step that read each position
  Vector dh = dh_final;
  Vector dc = Vector::Zero(h);
  for (int s = L - 1; s >= 0; --s) {
    const int t = reverse ? L - 1 - s : s;
    const auto gates = tr.gates.col(s);
    const auto i = gates.segment(0, h).array();
    const auto f = gates.segment(h, h).array();
    const auto o = gates.segment(2 * h, h).array();
    const auto g = gates.segment(3 * h, h).array();
    const Eigen::ArrayXd tc = tr.cells.col(s + 1).array().tanh();
    dc.array() += dh.array() * o * (1.0 - tc.square());
    auto col = dz.col(t);
    col.segment(0, h) = (dc.array() * g * i * (1.0 - i)).matrix();
    col.segment(h, h) = (dc.array() * tr.cells.col(s).array() * f * (1.0 - f)).matrix();
    col.segment(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
    col.segment(3 * h, h) = (dc.array() * i * (1.0 - g.square())).matrix();
    prev_hidden.col(t) = tr.hidden.col(s);
    dh.noalias() = cell.weights.rightCols(h).transpose() * col;
    dc.array() *= f;
  }
  grad.weights.leftCols(d).noalias() += dz * x.tokens.topRows(L);
  grad.weights.rightCols(h).noalias() += dz * prev_hidden.transpose();
  grad.bias += dz.rowwise().sum();
}

ExampleTrace trace_example(const Example& ex, const BiLstmParams& lstm, const HeadParams& head) {
  check_shapes(ex.input, lstm);
  const int h = lstm.hidden_dim;
  ExampleTrace tr;
  tr.input = &ex.input;
  tr.forward = run_direction(lstm.forward, ex.input, h, false);
  tr.backward = run_direction(lstm.backward, ex.input, h, true);
  tr.features.resize(2 * h);
  tr.features << tr.forward.hidden.col(ex.input.valid_length), tr.backward.hidden.col(ex.input.valid_length);
  tr.probability = head_forward(tr.features, head);
  tr.label = ex.label;
  return tr;
}

template <typename Span, typename P>
std::vector<Span> blocks_of(P& p) {
  return {Span(p.forward.weights.data(), static_cast<std::size_t>(p.forward.weights.size())),
          Span(p.forward.bias.data(), static_cast<std::size_t>(p.forward.bias.size())),
          Span(p.backward.weights.data(), static_cast<std::size_t>(p.backward.weights.size())),
          Span(p.backward.bias.data(), static_cast<std::size_t>(p.backward.bias.size()))};
}

}  // namespace

BiLstmParams BiLstmParams::zeros(int d, int h) {
  if (d < 1 || h < 1) throw ValidationError(fmt::format("invalid BiLSTM shape d={} h={}", d, h));
  return {d, h, zero_cell(d, h), zero_cell(d, h)};
}

BiLstmParams BiLstmParams::random(int d, int h, std::mt19937_64& rng) {
  if (d < 1 || h < 1) throw ValidationError(fmt::format("invalid BiLSTM shape d={} h={}", d, h));
  BiLstmParams p{d, h, {}, {}};
  p.forward = random_cell(d, h, rng);
  p.backward = random_cell(d, h, rng);
  return p;
}

HeadParams HeadParams::zeros(int h) { return {Vector::Zero(2 * h), 0.0}; }

HeadParams HeadParams::random(int h, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * h));
  std::uniform_real_distribution<double> u(-bound, bound);
  HeadParams p = zeros(h);
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights(i) = u(rng);
  p.bias = u(rng);
  return p;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector bilstm_forward(const EncodedPair& x, const BiLstmParams& p) {
  check_shapes(x, p);
  const int h = p.hidden_dim;
  const auto fwd = run_direction(p.forward, x, h, false);
  const auto bwd = run_direction(p.backward, x, h, true);
  Vector out(2 * h);
  out << fwd.hidden.col(x.valid_length), bwd.hidden.col(x.valid_length);
  return out;
}

double head_forward(const Vector& features, const HeadParams& p) {
  if (features.size() != p.weights.size())
    throw ValidationError(fmt::format("head expects {} features, got {}", p.weights.size(), features.size()));
  return sigmoid(p.weights.dot(features) + p.bias);
}

double bce_loss(double prob, double label) {
  const double p = std::clamp(prob, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

BatchTrace forward_batch(std::span<const Example* const> batch, const BiLstmParams& lstm, const HeadParams& head) {
  if (batch.empty()) throw ValidationError("empty batch");
  BatchTrace out;
  out.items.reserve(batch.size());
  double total = 0.0;
  for (const Example* ex : batch) {
    out.items.push_back(trace_example(*ex, lstm, head));
    total += bce_loss(out.items.back().probability, ex->label);
  }
  out.mean_loss = total / static_cast<double>(batch.size());
  return out;
}

Gradients backward(const BatchTrace& trace, const BiLstmParams& lstm, const HeadParams& head) {
  const int h = lstm.hidden_dim;
  Gradients g{BiLstmParams::zeros(lstm.input_dim, h), HeadParams::zeros(h)};
  const double scale = 1.0 / static_cast<double>(trace.items.size());
  Vector dfeatures(2 * h);
  for (const auto& item : trace.items) {
    // d(BCE)/d(logit) of a sigmoid output.
    const double dlogit = (item.probability - item.label) * scale;
    g.head.weights += dlogit * item.features;
    g.head.bias += dlogit;
    dfeatures = dlogit * head.weights;
    backprop_direction(lstm.forward, item.forward, *item.input, h, false, dfeatures.head(h), g.lstm.forward);
    backprop_direction(lstm.backward, item.backward, *item.input, h, true, dfeatures.tail(h), g.lstm.backward);
  }
  return g;
}

double batch_loss(std::span<const Example* const> batch, const BiLstmParams& lstm, const HeadParams& head) {
  if (batch.empty()) throw ValidationError("empty batch");
  double total = 0.0;
  for (const Example* ex : batch) total += bce_loss(head_forward(bilstm_forward(ex->input, lstm), head), ex->label);
  return total / static_cast<double>(batch.size());
}

std::vector<std::span<double>> parameter_blocks(BiLstmParams& p) { return blocks_of<std::span<double>>(p); }

std::vector<std::span<const double>> parameter_blocks(const BiLstmParams& p) {
  return blocks_of<std::span<const double>>(p);
}

std::vector<std::span<double>> parameter_blocks(HeadParams& p) {
  return {std::span<double>(p.weights.data(), static_cast<std::size_t>(p.weights.size())),
          std::span<double>(&p.bias, 1)};
}

std::vector<std::span<const double>> parameter_blocks(const HeadParams& p) {
  return {std::span<const double>(p.weights.data(), static_cast<std::size_t>(p.weights.size())),
          std::span<const double>(&p.bias, 1)};
}

}  // namespace revlab::neural
