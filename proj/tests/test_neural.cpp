#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gradient_check.hpp"
#include "revlab/error.hpp"
#include "revlab/neural/adam.hpp"
#include "revlab/neural/embedding.hpp"
#include "revlab/neural/network.hpp"
#include "support.hpp"

using namespace revlab;
using namespace revlab::neural;

namespace {

// Straightforward per-scalar LSTM used as an independent oracle for the Eigen implementation.
std::vector<double> scalar_direction(const LstmCell& cell, const EncodedPair& x, int h, bool reverse) {
  const int d = x.dimension();
  const int L = x.valid_length;
  std::vector<double> hidden(h, 0.0), state(h, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int s = 0; s < L; ++s) {
    const int t = reverse ? L - 1 - s : s;
    std::vector<double> z(4 * h);
    for (int r = 0; r < 4 * h; ++r) {
      double acc = cell.bias(r);
      for (int j = 0; j < d; ++j) acc += cell.weights(r, j) * x.tokens(t, j);
      for (int j = 0; j < h; ++j) acc += cell.weights(r, d + j) * hidden[j];
      z[r] = acc;
    }
    for (int k = 0; k < h; ++k) {
      const double i = sig(z[k]), f = sig(z[h + k]), o = sig(z[2 * h + k]), g = std::tanh(z[3 * h + k]);
      state[k] = f * state[k] + i * g;
      hidden[k] = o * std::tanh(state[k]);
    }
  }
  return hidden;
}

}  // namespace

TEST_CASE("sigmoid is stable at extreme logits") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(-3.0) == doctest::Approx(1.0 - sigmoid(3.0)).epsilon(1e-14));
}

TEST_CASE("binary cross-entropy clamps probabilities") {
  CHECK(bce_loss(0.0, 1.0) == doctest::Approx(-std::log(kProbabilityEpsilon)));
  CHECK(bce_loss(1.0, 0.0) == doctest::Approx(-std::log(kProbabilityEpsilon)));
  CHECK(bce_loss(0.25, 1.0) == doctest::Approx(-std::log(0.25)));
  CHECK(bce_loss(0.25, 0.0) == doctest::Approx(-std::log(0.75)));
}

TEST_CASE("BiLSTM forward matches a scalar reference implementation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 6), h = 1 + static_cast<int>(rng() % 6);
    const int max_len = 1 + static_cast<int>(rng() % 7), valid = 1 + static_cast<int>(rng() % max_len);
    const auto p = BiLstmParams::random(d, h, rng);
    const auto x = testing::random_pair(d, valid, max_len, rng);
    const Vector out = bilstm_forward(x, p);
    const auto fwd = scalar_direction(p.forward, x, h, false);
    const auto bwd = scalar_direction(p.backward, x, h, true);
    REQUIRE(out.size() == 2 * h);
    for (int k = 0; k < h; ++k) {
      CHECK(out(k) == doctest::Approx(fwd[k]).epsilon(1e-12));
      CHECK(out(h + k) == doctest::Approx(bwd[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("padding rows never influence the output") {
  std::mt19937_64 rng(5);
  const auto p = BiLstmParams::random(4, 3, rng);
  auto x = testing::random_pair(4, 3, 8, rng);
  const Vector before = bilstm_forward(x, p);
  for (int t = 3; t < 8; ++t) x.tokens.row(t).setConstant(123.0);
  CHECK((bilstm_forward(x, p) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape errors are rejected") {
  std::mt19937_64 rng(1);
  const auto p = BiLstmParams::random(4, 3, rng);
  auto x = testing::random_pair(5, 2, 4, rng);
  CHECK_THROWS_AS(bilstm_forward(x, p), ValidationError);
  auto y = testing::random_pair(4, 2, 4, rng);
  y.valid_length = 0;
  CHECK_THROWS_AS(bilstm_forward(y, p), ValidationError);
  CHECK_THROWS_AS(BiLstmParams::zeros(0, 3), ValidationError);
}

TEST_CASE("analytic gradients agree with central differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const auto c = testing::random_case(rng);
    CAPTURE(c.d);
    CAPTURE(c.h);
    CAPTURE(c.max_len);
    CHECK(testing::max_gradient_error(c, rng) < 1e-4);
  }
}

TEST_CASE("Adam step follows the bias-corrected update") {
  std::vector<double> p{1.0, -2.0}, g{0.5, -0.25};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  auto state = OptimizerState::for_blocks(std::vector<std::span<const double>>{p}, AdamConfig{});
  optimizer_step(params, grads, state);
  // First step: m_hat = g, v_hat = g^2, so each parameter moves by lr * g / (|g| + eps).
  CHECK(p[0] == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(-2.0 + 1e-3 * 0.25 / (0.25 + 1e-8)).epsilon(1e-14));

  // Second step against a hand-rolled recurrence.
  const double g2 = 0.1;
  g = {g2, g2};
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * g2;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * g2 * g2;
  const double expected = p[0] - 1e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  optimizer_step(params, grads, state);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-13));
  CHECK(state.step == 2);
}

TEST_CASE("non-finite gradients abort without touching parameters") {
  std::vector<double> p{1.0, 2.0}, g{0.1, std::nan("")};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  auto state = OptimizerState::for_blocks(std::vector<std::span<const double>>{p}, AdamConfig{});
  const std::vector<std::string> names{"weights"};
  try {
    optimizer_step(params, grads, state, names);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(state.step == 0);
}

TEST_CASE("a few Adam steps reduce the loss on a fixed batch") {
  std::mt19937_64 rng(9);
  auto lstm = BiLstmParams::random(3, 4, rng);
  auto head = HeadParams::random(4, rng);
  std::vector<Example> ex;
  for (int i = 0; i < 8; ++i) ex.push_back({"e", testing::random_pair(3, 4, 4, rng), static_cast<double>(i % 2)});
  std::vector<const Example*> batch;
  for (const auto& e : ex) batch.push_back(&e);
  auto enc_state = OptimizerState::for_blocks(parameter_blocks(std::as_const(lstm)), AdamConfig{0.01});
  auto head_state = OptimizerState::for_blocks(parameter_blocks(std::as_const(head)), AdamConfig{0.01});
  const double start = batch_loss(batch, lstm, head);
  for (int step = 0; step < 50; ++step) {
    const auto grads = backward(forward_batch(batch, lstm, head), lstm, head);
    optimizer_step(parameter_blocks(lstm), parameter_blocks(grads.lstm), enc_state);
    optimizer_step(parameter_blocks(head), parameter_blocks(grads.head), head_state);
  }
  CHECK(batch_loss(batch, lstm, head) < 0.8 * start);
}

TEST_CASE("embedding tables round-trip and synthesize reserved tokens") {
  std::istringstream in("alpha 1 0 0\nbeta 0 1 0\n");
  auto table = parse_embedding_table(in);
  CHECK(table.dimension() == 3);
  CHECK(table.contains("<unk>"));
  CHECK(table.contains("<sep>"));
  CHECK(table.unknown().norm() == doctest::Approx(1.0));
  CHECK(table.separator().norm() == doctest::Approx(1.0));
  CHECK(table.lookup("ALPHA")(0) == 1.0);
  CHECK(table.lookup("gamma") == table.unknown());

  std::istringstream again(serialize_embedding_table(table));
  const auto copy = parse_embedding_table(again);
  CHECK(serialize_embedding_table(copy) == serialize_embedding_table(table));
}

TEST_CASE("embedding parse errors") {
  std::istringstream ragged("a 1 2\nb 1\n");
  CHECK_THROWS_AS(parse_embedding_table(ragged), ValidationError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_embedding_table(empty), ValidationError);
  std::istringstream bad("a 1 x\n");
  CHECK_THROWS_AS(parse_embedding_table(bad), ValidationError);
}

TEST_CASE("pair encoding keeps the separator and truncates text_b first") {
  const auto r = testing::make_revision("r", "e", corpus::RevisionOp::Modify, "a b c", "d e f g",
                                        corpus::Label::Desirable);
  CHECK(pair_tokens(r, 20) == std::vector<std::string>{"a", "b", "c", "<sep>", "d", "e", "f", "g"});
  CHECK(pair_tokens(r, 5) == std::vector<std::string>{"a", "b", "c", "<sep>", "d"});
  CHECK(pair_tokens(r, 3) == std::vector<std::string>{"a", "b", "<sep>"});

  std::istringstream in("a 1 0\nb 0 1\n");
  const auto table = parse_embedding_table(in);
  const auto enc = encode_pair(r, table, 10);
  CHECK(enc.max_length() == 10);
  CHECK(enc.valid_length == 8);
  CHECK(enc.tokens.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(enc.tokens(0, 0) == 1.0);
}
