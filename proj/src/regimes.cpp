#include "revlab/regimes.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::regimes {

using neural::BiLstmParams;
using neural::HeadParams;
using neural::OptimizerState;
using json = nlohmann::ordered_json;

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::uint32_t> salt) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), salt);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kInitEncoder = 1;
constexpr std::uint32_t kInitHead = 2;
constexpr std::uint32_t kShuffle = 3;

// Training phases get distinct shuffle streams so a fine-tuning pass does not replay the
// pretraining order.
constexpr std::uint32_t kPhasePretrain = 0;
constexpr std::uint32_t kPhaseFineTune = 1;

void check_task_data(const TaskData& t) {
  if (t.examples.empty()) throw TrainingError(fmt::format("task {}: no training data", t.task));
  bool pos = false, neg = false;
  for (const auto& ex : t.examples) (ex.label > 0.5 ? pos : neg) = true;
  if (!pos || !neg) throw TrainingError(fmt::format("task {}: single-class data", t.task));
}

void check_dimensions(std::span<const TaskData* const> tasks, int input_dim) {
  for (const auto* t : tasks)
    for (const auto& ex : t->examples)
      if (ex.input.dimension() != input_dim)
        throw ValidationError(fmt::format("task {}: example {} has dimension {}, expected {}", t->task, ex.id,
                                          ex.input.dimension(), input_dim));
}

int input_dim_of(std::span<const TaskData* const> tasks) { return tasks.front()->examples.front().input.dimension(); }

neural::AdamConfig adam_config(const TrainConfig& cfg) {
  neural::AdamConfig a;
  a.learning_rate = cfg.learning_rate;
  return a;
}

template <typename P>
OptimizerState fresh_state(const P& params, const TrainConfig& cfg) {
  const auto blocks = neural::parameter_blocks(params);
  return OptimizerState::for_blocks(blocks, adam_config(cfg));
}

template <typename P>
std::vector<std::span<const double>> const_blocks(const P& p) {
  return neural::parameter_blocks(p);
}

struct Stream {
  const TaskData* data;
  std::size_t head;
  std::mt19937_64 rng;
  std::vector<std::size_t> order;
};

// Runs cfg.epochs epochs of round-robin batches. `heads[s.head]` is the head a task's batches
// train; one optimizer state per head plus one for the encoder.
void run_epochs(BiLstmParams& lstm, std::vector<HeadParams*>& heads, std::vector<Stream>& streams,
                const TrainConfig& cfg, const std::function<void(const StepEvent&)>& after_step) {
  OptimizerState lstm_state = fresh_state(lstm, cfg);
  std::vector<OptimizerState> head_states;
  for (auto* h : heads) head_states.push_back(fresh_state(*h, cfg));

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::string> names;
  std::vector<std::size_t> batches;
  for (const auto& s : streams) {
    names.push_back(s.data->task);
    batches.push_back((s.data->examples.size() + batch - 1) / batch);
  }
  const auto schedule = round_robin_schedule(batches, names);

  std::vector<const Example*> members;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& s : streams) {
      s.order.resize(s.data->examples.size());
      std::iota(s.order.begin(), s.order.end(), std::size_t{0});
      std::shuffle(s.order.begin(), s.order.end(), s.rng);
    }
    std::size_t cursor = 0;
    for (const auto& entry : schedule) {
      // Schedules name tasks by position in `streams`; duplicate task names are rejected earlier.
      while (streams[cursor].data->task != entry.task) cursor = (cursor + 1) % streams.size();
      auto& s = streams[cursor];
      const std::size_t begin = entry.batch * batch;
      const std::size_t end = std::min(begin + batch, s.order.size());
      members.clear();
      for (std::size_t k = begin; k < end; ++k) members.push_back(&s.data->examples[s.order[k]]);

      HeadParams& head = *heads[s.head];
      const auto trace = neural::forward_batch(members, lstm, head);
      auto grads = neural::backward(trace, lstm, head);

      static const std::vector<std::string> kLstmNames{"forward.weights", "forward.bias", "backward.weights",
                                                       "backward.bias"};
      static const std::vector<std::string> kHeadNames{"head.weights", "head.bias"};
      const auto lstm_blocks = neural::parameter_blocks(lstm);
      const auto head_blocks = neural::parameter_blocks(head);
      neural::optimizer_step(lstm_blocks, const_blocks(grads.lstm), lstm_state, kLstmNames);
      neural::optimizer_step(head_blocks, const_blocks(grads.head), head_states[s.head], kHeadNames);
      if (after_step) after_step({epoch, entry, trace.mean_loss});
    }
  }
}

std::vector<const TaskData*> ordered_tasks(std::span<const TaskData> tasks, const std::vector<std::string>& order,
                                           bool require_all) {
  if (tasks.empty()) throw TrainingError("no tasks to train on");
  std::set<std::string> seen;
  for (const auto& t : tasks) {
    if (!seen.insert(t.task).second) throw ValidationError(fmt::format("task {} given twice", t.task));
    if (std::find(order.begin(), order.end(), t.task) == order.end())
      throw ValidationError(fmt::format("task {} is not in the task order", t.task));
  }
  std::vector<const TaskData*> out;
  for (const auto& name : order) {
    auto it = std::find_if(tasks.begin(), tasks.end(), [&](const TaskData& t) { return t.task == name; });
    if (it != tasks.end())
      out.push_back(&*it);
    else if (require_all)
      throw TrainingError(fmt::format("missing task {}", name));
  }
  return out;
}

StlModel fresh_stl(const std::string& task, int input_dim, const TrainConfig& cfg) {
  auto enc_rng = stream(cfg.seed, {kInitEncoder});
  auto head_rng = stream(cfg.seed, {kInitHead});
  StlModel m{task, BiLstmParams::random(input_dim, cfg.hidden_dim, enc_rng), HeadParams::random(cfg.hidden_dim, head_rng)};
  return m;
}

StlModel train_single_head(StlModel model, std::span<const TaskData* const> tasks, const TrainConfig& cfg,
                           std::uint32_t phase, const TrainHooks& hooks) {
  std::vector<Stream> streams;
  for (std::size_t k = 0; k < tasks.size(); ++k)
    streams.push_back({tasks[k], 0, stream(cfg.seed, {kShuffle, phase, static_cast<std::uint32_t>(k)}), {}});
  std::vector<HeadParams*> heads{&model.head};
  run_epochs(model.lstm, heads, streams, cfg, [&](const StepEvent& ev) {
    if (hooks.on_stl_step) hooks.on_stl_step(ev, model);
  });
  return model;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (task_order.empty()) throw ValidationError("task_order must not be empty");
  std::set<std::string> uniq(task_order.begin(), task_order.end());
  if (uniq.size() != task_order.size()) throw ValidationError("task_order has duplicates");
  if (hidden_dim < 1) throw ValidationError("hidden_dim must be at least 1");
  if (max_len < 3) throw ValidationError("max_len must be at least 3");
}

std::string TrainConfig::to_json() const {
  json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["task_order"] = task_order;
  j["hidden_dim"] = hidden_dim;
  j["max_len"] = max_len;
  return j.dump();
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("malformed train config: {}", e.what()));
  }
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate")
        c.learning_rate = value.get<double>();
      else if (key == "batch_size")
        c.batch_size = value.get<int>();
      else if (key == "epochs")
        c.epochs = value.get<int>();
      else if (key == "seed")
        c.seed = value.get<std::uint64_t>();
      else if (key == "task_order")
        c.task_order = value.get<std::vector<std::string>>();
      else if (key == "hidden_dim")
        c.hidden_dim = value.get<int>();
      else if (key == "max_len")
        c.max_len = value.get<int>();
      else
        throw ValidationError(fmt::format("unknown train config key '{}'", key));
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("bad train config value: {}", e.what()));
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const { return fnv1a_hex(to_json()); }

bool MtlModel::has_task(std::string_view task) const {
  return std::any_of(heads.begin(), heads.end(), [&](const auto& h) { return h.first == task; });
}

const HeadParams& MtlModel::head(std::string_view task) const {
  for (const auto& [name, h] : heads)
    if (name == task) return h;
  throw ValidationError(fmt::format("model has no head for task '{}'", task));
}

HeadParams& MtlModel::head(std::string_view task) {
  return const_cast<HeadParams&>(std::as_const(*this).head(task));
}

std::vector<ScheduleEntry> round_robin_schedule(std::size_t batches_per_task, std::span<const std::string> order) {
  if (order.empty()) throw ValidationError("round-robin schedule needs at least one task");
  if (batches_per_task < 1) throw ValidationError("round-robin schedule needs at least one batch per task");
  std::vector<std::size_t> counts(order.size(), batches_per_task);
  return round_robin_schedule(counts, order);
}

std::vector<ScheduleEntry> round_robin_schedule(std::span<const std::size_t> batches_per_task,
                                                std::span<const std::string> order) {
  if (order.empty()) throw ValidationError("round-robin schedule needs at least one task");
  if (batches_per_task.size() != order.size()) throw ValidationError("one batch count per task required");
  const std::size_t cycles = *std::max_element(batches_per_task.begin(), batches_per_task.end());
  std::vector<ScheduleEntry> out;
  out.reserve(std::accumulate(batches_per_task.begin(), batches_per_task.end(), std::size_t{0}));
  for (std::size_t c = 0; c < cycles; ++c)
    for (std::size_t t = 0; t < order.size(); ++t)
      if (c < batches_per_task[t]) out.push_back({order[t], c});
  return out;
}

StlModel train_stl(const TaskData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_task_data(data);
  const TaskData* tasks[] = {&data};
  check_dimensions(tasks, input_dim_of(tasks));
  return train_single_head(fresh_stl(data.task, input_dim_of(tasks), cfg), tasks, cfg, kPhasePretrain, hooks);
}

StlModel train_union(std::span<const TaskData> tasks, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const auto ordered = ordered_tasks(tasks, cfg.task_order, false);
  std::size_t pos = 0, neg = 0;
  for (const auto* t : ordered)
    for (const auto& ex : t->examples) ++(ex.label > 0.5 ? pos : neg);
  if (pos + neg == 0) throw TrainingError("union of task data is empty");
  if (pos == 0 || neg == 0) throw TrainingError("union: single-class data");
  for (const auto* t : ordered)
    if (t->examples.empty()) throw TrainingError(fmt::format("task {}: no training data", t->task));
  check_dimensions(ordered, input_dim_of(ordered));
  // A one-task union is exactly that task's STL model.
  const std::string name = ordered.size() == 1 ? ordered.front()->task : std::string("union");
  return train_single_head(fresh_stl(name, input_dim_of(ordered), cfg), ordered, cfg, kPhasePretrain, hooks);
}

MtlModel train_mtl(std::span<const TaskData> tasks, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const auto ordered = ordered_tasks(tasks, cfg.task_order, true);
  for (const auto* t : ordered) check_task_data(*t);
  for (const auto* t : ordered)
    if (t->examples.size() != ordered.front()->examples.size())
      throw TrainingError(fmt::format("unequal task sizes ({} has {}, {} has {}); augment to equal sizes first",
                                      ordered.front()->task, ordered.front()->examples.size(), t->task,
                                      t->examples.size()));
  check_dimensions(ordered, input_dim_of(ordered));

  const auto base = fresh_stl("", input_dim_of(ordered), cfg);
  MtlModel model;
  model.shared = base.lstm;
  for (const auto* t : ordered) model.heads.emplace_back(t->task, base.head);

  std::vector<Stream> streams;
  std::vector<HeadParams*> heads;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    streams.push_back({ordered[k], k, stream(cfg.seed, {kShuffle, kPhasePretrain, static_cast<std::uint32_t>(k)}), {}});
    heads.push_back(&model.heads[k].second);
  }
  run_epochs(model.shared, heads, streams, cfg, [&](const StepEvent& ev) {
    if (hooks.on_mtl_step) hooks.on_mtl_step(ev, model);
  });
  return model;
}

StlModel fine_tune(StlModel pretrained, const TaskData& target, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_task_data(target);
  const TaskData* tasks[] = {&target};
  check_dimensions(tasks, pretrained.lstm.input_dim);
  if (pretrained.lstm.hidden_dim != cfg.hidden_dim)
    throw ValidationError("pretrained model hidden size differs from the config");
  pretrained.task = target.task;
  return train_single_head(std::move(pretrained), tasks, cfg, kPhaseFineTune, hooks);
}

StlModel train_tl(const TaskData& source, const TaskData& target, const TrainConfig& cfg, const TrainHooks& hooks) {
  return fine_tune(train_stl(source, cfg, hooks), target, cfg, hooks);
}

corpus::Label decide(double probability) {
  return probability > 0.5 ? corpus::Label::Desirable : corpus::Label::Undesirable;
}

namespace {

std::vector<Prediction> predict_with(const BiLstmParams& lstm, const HeadParams& head, std::span<const Example> examples) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const double p = neural::head_forward(neural::bilstm_forward(ex.input, lstm), head);
    out.push_back({p, decide(p)});
  }
  return out;
}

}  // namespace

std::vector<Prediction> predict(const StlModel& model, std::span<const Example> examples) {
  return predict_with(model.lstm, model.head, examples);
}

std::vector<Prediction> predict(const MtlModel& model, std::span<const Example> examples, std::string_view task) {
  return predict_with(model.shared, model.head(task), examples);
}

std::vector<Example> make_examples(std::span<const corpus::Revision> revs, const neural::EmbeddingTable& table,
                                   int max_len) {
  std::vector<Example> out;
  out.reserve(revs.size());
  for (const auto& r : revs)
    out.push_back({r.revision_id, neural::encode_pair(r, table, max_len),
                   r.label == corpus::Label::Desirable ? 1.0 : 0.0});
  return out;
}

}  // namespace revlab::regimes
