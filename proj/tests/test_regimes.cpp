#include <doctest.h>

#include <random>

#include "revlab/checkpoint.hpp"
#include "revlab/error.hpp"
#include "revlab/regimes.hpp"
#include "support.hpp"

using namespace revlab;
using namespace revlab::regimes;

namespace {

// Label is the sign of the first coordinate of the first token; the rest is noise.
TaskData toy_task(const std::string& name, std::size_t n, std::uint64_t seed, int d = 3) {
  std::mt19937_64 rng(seed);
  TaskData t{name, {}};
  for (std::size_t i = 0; i < n; ++i) {
    auto x = testing::random_pair(d, 2 + static_cast<int>(rng() % 3), 5, rng);
    const bool pos = i % 2 == 0;
    x.tokens(0, 0) = pos ? 1.5 : -1.5;
    t.examples.push_back({name + std::to_string(i), std::move(x), pos ? 1.0 : 0.0});
  }
  return t;
}

TrainConfig small_config(std::vector<std::string> order = {"A"}) {
  TrainConfig cfg;
  cfg.hidden_dim = 4;
  cfg.max_len = 5;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 42;
  cfg.task_order = std::move(order);
  return cfg;
}

bool same(const neural::BiLstmParams& a, const neural::BiLstmParams& b) {
  return a.forward.weights == b.forward.weights && a.forward.bias == b.forward.bias &&
         a.backward.weights == b.backward.weights && a.backward.bias == b.backward.bias;
}

bool same(const neural::HeadParams& a, const neural::HeadParams& b) { return a.weights == b.weights && a.bias == b.bias; }

double accuracy(const std::vector<Prediction>& preds, const TaskData& t) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    ok += (preds[i].label == corpus::Label::Desirable) == (t.examples[i].label > 0.5) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("round-robin schedule cycles tasks one batch at a time") {
  const std::vector<std::string> order{"C", "H1", "H2", "E"};
  const auto s = round_robin_schedule(3, order);
  REQUIRE(s.size() == 12);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].task == order[i % 4]);
    CHECK(s[i].batch == i / 4);
  }
  const std::vector<std::size_t> counts{1, 3, 2, 0};
  const auto uneven = round_robin_schedule(counts, order);
  const std::vector<ScheduleEntry> expected{{"C", 0}, {"H1", 0}, {"H2", 0}, {"H1", 1}, {"H2", 1}, {"H1", 2}};
  CHECK(uneven == expected);
  CHECK_THROWS_AS(round_robin_schedule(0, order), ValidationError);
  CHECK_THROWS_AS(round_robin_schedule(std::span(counts).first(2), order), ValidationError);
}

TEST_CASE("train config validation and JSON round trip") {
  auto cfg = small_config({"C", "E"});
  cfg.learning_rate = 0.005;
  const auto back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.hash() == cfg.hash());
  auto other = cfg;
  other.seed = 43;
  CHECK(other.hash() != cfg.hash());

  CHECK(TrainConfig::from_json("{}").to_json() == TrainConfig{}.to_json());
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochz": 3})"), ValidationError);
  CHECK_THROWS_AS(TrainConfig::from_json("[1]"), ValidationError);
  for (auto bad : {R"({"epochs": 0})", R"({"batch_size": 0})", R"({"learning_rate": 0})",
                   R"({"task_order": ["C", "C"]})", R"({"hidden_dim": 0})"})
    CHECK_THROWS_AS(TrainConfig::from_json(bad).validate(), ValidationError);
}

TEST_CASE("training is deterministic per seed") {
  const auto data = toy_task("A", 40, 1);
  const auto cfg = small_config();
  const auto a = train_stl(data, cfg);
  const auto b = train_stl(data, cfg);
  CHECK(same(a.lstm, b.lstm));
  CHECK(same(a.head, b.head));
  auto other = cfg;
  other.seed = 7;
  CHECK_FALSE(same(train_stl(data, other).lstm, a.lstm));
}

TEST_CASE("STL learns a separable toy task") {
  auto cfg = small_config();
  cfg.epochs = 30;
  cfg.learning_rate = 0.01;
  const auto train = toy_task("A", 64, 2);
  const auto test = toy_task("A", 64, 3);
  const auto model = train_stl(train, cfg);
  CHECK(accuracy(predict(model, test.examples), test) >= 0.95);
}

TEST_CASE("prediction does not depend on example order") {
  const auto data = toy_task("A", 20, 4);
  const auto model = train_stl(data, small_config());
  const auto forward = predict(model, data.examples);
  std::vector<Example> reversed(data.examples.rbegin(), data.examples.rend());
  const auto backward = predict(model, reversed);
  for (std::size_t i = 0; i < forward.size(); ++i)
    CHECK(forward[i].probability == backward[forward.size() - 1 - i].probability);
  CHECK(decide(0.5) == corpus::Label::Undesirable);
  CHECK(decide(0.5000001) == corpus::Label::Desirable);
}

TEST_CASE("MTL batches touch only the shared encoder and their own head") {
  const std::vector<std::string> order{"C", "H1", "H2", "E"};
  std::vector<TaskData> tasks;
  for (std::size_t i = 0; i < order.size(); ++i) tasks.push_back(toy_task(order[i], 16, 10 + i));
  auto cfg = small_config(order);
  cfg.epochs = 1;
  std::optional<MtlModel> previous;
  std::vector<std::string> seen;
  TrainHooks hooks;
  hooks.on_mtl_step = [&](const StepEvent& ev, const MtlModel& m) {
    if (previous) {
      CHECK_FALSE(same(previous->shared, m.shared));
      for (const auto& [task, head] : m.heads) {
        if (task == ev.entry.task)
          CHECK_FALSE(same(previous->head(task), head));
        else
          CHECK(same(previous->head(task), head));
      }
    }
    seen.push_back(ev.entry.task);
    previous = m;
  };
  const auto model = train_mtl(tasks, cfg, hooks);
  REQUIRE(seen.size() == 8);
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == order[i % 4]);
  CHECK(model.heads.size() == 4);
  CHECK_THROWS_AS(predict(model, tasks[0].examples, "X"), ValidationError);
  CHECK(predict(model, tasks[0].examples, "C").size() == 16);
}

TEST_CASE("MTL needs every task at equal size") {
  const std::vector<std::string> order{"A", "B"};
  std::vector<TaskData> tasks{toy_task("A", 16, 1), toy_task("B", 20, 2)};
  CHECK_THROWS_AS(train_mtl(tasks, small_config(order)), TrainingError);
  tasks.pop_back();
  CHECK_THROWS_AS(train_mtl(tasks, small_config(order)), TrainingError);
}

TEST_CASE("Union over differently sized tasks drops exhausted tasks") {
  const std::vector<std::string> order{"A", "B"};
  std::vector<TaskData> tasks{toy_task("A", 8, 1), toy_task("B", 24, 2)};
  std::vector<std::string> seen;
  TrainHooks hooks;
  hooks.on_stl_step = [&](const StepEvent& ev, const StlModel&) { seen.push_back(ev.entry.task); };
  auto cfg = small_config(order);
  cfg.epochs = 1;
  train_union(tasks, cfg, hooks);
  CHECK(seen == std::vector<std::string>{"A", "B", "B", "B"});
}

TEST_CASE("one-task Union and MTL reduce to STL") {
  const auto data = toy_task("A", 40, 5);
  const auto cfg = small_config();
  const Checkpoint stl{"stl", cfg, train_stl(data, cfg)};
  const Checkpoint uni{"union", cfg, train_union(std::span(&data, 1), cfg)};
  const Checkpoint mtl{"mtl", cfg, train_mtl(std::span(&data, 1), cfg)};
  CHECK(same_parameters(stl, uni));
  CHECK(same_parameters(stl, mtl));
}

TEST_CASE("single-class or empty data is a training error") {
  auto data = toy_task("A", 10, 6);
  for (auto& e : data.examples) e.label = 1.0;
  CHECK_THROWS_AS(train_stl(data, small_config()), TrainingError);
  data.examples.clear();
  CHECK_THROWS_AS(train_stl(data, small_config()), TrainingError);
}

TEST_CASE("continued training on the same data does not raise the loss") {
  const auto data = toy_task("A", 48, 7);
  auto cfg = small_config();
  cfg.epochs = 5;
  double first = 0.0, last = 0.0;
  TrainHooks track_first, track_last;
  track_first.on_stl_step = [&](const StepEvent& ev, const StlModel&) {
    if (ev.epoch == cfg.epochs - 1) first += ev.loss;
  };
  track_last.on_stl_step = [&](const StepEvent& ev, const StlModel&) {
    if (ev.epoch == cfg.epochs - 1) last += ev.loss;
  };
  const auto pre = train_stl(data, cfg, track_first);
  const auto tuned = fine_tune(pre, data, cfg, track_last);
  CHECK(last <= 1.1 * first);
  const auto tl = train_tl(data, data, cfg);
  CHECK(same(tl.lstm, tuned.lstm));
  CHECK(same(tl.head, tuned.head));

  auto wrong = cfg;
  wrong.hidden_dim = 5;
  CHECK_THROWS_AS(fine_tune(pre, data, wrong), ValidationError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  testing::TempDir dir("ckpt");
  const std::vector<std::string> order{"A", "B"};
  std::vector<TaskData> tasks{toy_task("A", 16, 1), toy_task("B", 16, 2)};
  const auto cfg = small_config(order);
  const Checkpoint mtl{"mtl", cfg, train_mtl(tasks, cfg)};
  save_checkpoint(mtl, dir / "m.json");
  const auto back = load_checkpoint(dir / "m.json");
  CHECK(back.regime == "mtl");
  CHECK(back.config_hash() == mtl.config_hash());
  CHECK(same_parameters(back, mtl));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(mtl));

  auto text = serialize_checkpoint(mtl);
  CHECK_THROWS_AS(parse_checkpoint(text.replace(text.find("\"version\":1"), 11, "\"version\":9")),
                  ValidationError);
  CHECK_THROWS_AS(parse_checkpoint("{}"), ValidationError);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.json"), ValidationError);
}
