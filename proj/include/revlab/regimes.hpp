#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revlab/corpus.hpp"
#include "revlab/neural/adam.hpp"
#include "revlab/neural/network.hpp"

namespace revlab::regimes {

using neural::Example;

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> task_order{"C", "H1", "H2", "E"};
  int hidden_dim = 64;
  int max_len = 64;

  /// Throws ValidationError for batch_size < 1, epochs < 1, non-positive learning rate, an empty
  /// or duplicated task order, or bad model dimensions.
  void validate() const;

  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(std::string_view text);
  /// Fingerprint of the canonical JSON form.
  std::string hash() const;
};

struct TaskData {
  std::string task;
  std::vector<Example> examples;
};

struct StlModel {
  std::string task;
  neural::BiLstmParams lstm;
  neural::HeadParams head;
};

/// One BiLSTM shared by every task plus a dense/sigmoid head per task, kept in task order.
struct MtlModel {
  neural::BiLstmParams shared;
  std::vector<std::pair<std::string, neural::HeadParams>> heads;

  bool has_task(std::string_view task) const;
  /// Throws ValidationError for an unknown task.
  const neural::HeadParams& head(std::string_view task) const;
  neural::HeadParams& head(std::string_view task);
};

struct ScheduleEntry {
  std::string task;
  std::size_t batch = 0;

  bool operator==(const ScheduleEntry&) const = default;
};

/// One batch per task per cycle, tasks in `order`, batch indices counting up within each task.
std::vector<ScheduleEntry> round_robin_schedule(std::size_t batches_per_task, std::span<const std::string> order);

/// Same cycling with per-task batch counts; a task drops out of later cycles once exhausted.
std::vector<ScheduleEntry> round_robin_schedule(std::span<const std::size_t> batches_per_task,
                                                std::span<const std::string> order);

struct StepEvent {
  int epoch = 0;
  ScheduleEntry entry;
  double loss = 0.0;
};

/// Optional observers called after every parameter update.
struct TrainHooks {
  std::function<void(const StepEvent&, const StlModel&)> on_stl_step;
  std::function<void(const StepEvent&, const MtlModel&)> on_mtl_step;
};

StlModel train_stl(const TaskData& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// A single classifier over every task's data, fed per-task batches in round-robin order.
StlModel train_union(std::span<const TaskData> tasks, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Shared BiLSTM with per-task heads. Each batch updates the shared block and its own task's head
/// only. Every task in cfg.task_order must be present and all tasks must have equal sizes.
MtlModel train_mtl(std::span<const TaskData> tasks, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Continues training every parameter of `pretrained` on `target` with fresh optimizer state.
StlModel fine_tune(StlModel pretrained, const TaskData& target, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// train_stl on the source followed by fine_tune on the target.
StlModel train_tl(const TaskData& source, const TaskData& target, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct Prediction {
  double probability = 0.5;
  corpus::Label label = corpus::Label::Undesirable;
};

/// Desirable iff probability > 0.5; an exact 0.5 is Undesirable.
corpus::Label decide(double probability);

std::vector<Prediction> predict(const StlModel& model, std::span<const Example> examples);
std::vector<Prediction> predict(const MtlModel& model, std::span<const Example> examples, std::string_view task);

/// Encodes revisions as training examples (label 1 = Desirable).
std::vector<Example> make_examples(std::span<const corpus::Revision> revs, const neural::EmbeddingTable& table,
                                   int max_len);

}  // namespace revlab::regimes
