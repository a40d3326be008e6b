#include "revlab/cross_validation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "revlab/error.hpp"
#include "revlab/parallel.hpp"

namespace revlab::eval {

using corpus::Label;
using corpus::Revision;

const TaskScores& CvResult::scores_for(std::string_view task) const {
  for (const auto& s : scores)
    if (s.task == task) return s;
  throw EvaluationError(fmt::format("no scores for task '{}'", task));
}

std::vector<Revision> training_split(const CvTask& t, int fold) {
  std::vector<Revision> out;
  for (const auto& r : t.corpus->revisions)
    if (t.folds.fold(r.essay_id) != fold) out.push_back(r);
  return out;
}

std::vector<Revision> test_split(const CvTask& t, int fold) {
  std::vector<Revision> out;
  for (const auto& r : t.corpus->revisions)
    if (t.folds.fold(r.essay_id) == fold) out.push_back(r);
  return out;
}

namespace {

void check_partition(const CvTask& t, int fold, std::span<const Revision> train, std::span<const Revision> test) {
  std::set<std::string> train_essays, test_essays, all;
  for (const auto& r : train) train_essays.insert(r.essay_id);
  for (const auto& r : test) test_essays.insert(r.essay_id);
  for (const auto& r : t.corpus->revisions) all.insert(r.essay_id);
  std::vector<std::string> overlap;
  std::set_intersection(train_essays.begin(), train_essays.end(), test_essays.begin(), test_essays.end(),
                        std::back_inserter(overlap));
  std::set<std::string> joined = train_essays;
  joined.insert(test_essays.begin(), test_essays.end());
  if (!overlap.empty() || joined != all || train.size() + test.size() != t.corpus->revisions.size())
    throw EvaluationError(fmt::format("task {} fold {}: train/test split is not a partition", t.task, fold));
}

std::uint64_t fold_seed(std::uint64_t seed, int fold, std::size_t task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fold), static_cast<std::uint32_t>(task), 0x61756775u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct FoldOutcome {
  std::vector<double> f1;  // per eval task
  std::vector<std::vector<std::pair<std::string, Label>>> predicted;
};

}  // namespace

CvResult cross_validate(std::span<const CvTask> tasks, const FoldTrainer& trainer, const CvOptions& opts) {
  if (tasks.empty()) throw EvaluationError("cross-validation needs at least one task");
  const int k = tasks.front().folds.k;
  if (k < 2) throw EvaluationError("cross-validation needs k >= 2");
  for (const auto& t : tasks) {
    if (!t.corpus) throw EvaluationError(fmt::format("task {} has no corpus", t.task));
    if (t.folds.k != k) throw EvaluationError("all tasks must use the same number of folds");
    for (const auto& e : t.corpus->essays)
      if (!t.folds.fold_of.contains(e.essay_id))
        throw EvaluationError(fmt::format("task {}: essay {} has no fold", t.task, e.essay_id));
  }
  std::vector<std::size_t> eval_index;
  if (opts.eval_tasks.empty()) {
    eval_index.resize(tasks.size());
    std::iota(eval_index.begin(), eval_index.end(), std::size_t{0});
  } else {
    for (const auto& name : opts.eval_tasks) {
      auto it = std::find_if(tasks.begin(), tasks.end(), [&](const CvTask& t) { return t.task == name; });
      if (it == tasks.end()) throw EvaluationError(fmt::format("unknown evaluation task '{}'", name));
      eval_index.push_back(static_cast<std::size_t>(it - tasks.begin()));
    }
  }

  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), opts.threads, [&](std::size_t f) {
    const int fold = static_cast<int>(f);
    std::vector<TrainingSet> train;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      const auto& t = tasks[ti];
      auto split = training_split(t, fold);
      check_partition(t, fold, split, test_split(t, fold));
      if (opts.targets) {
        std::size_t d = 0;
        for (const auto& r : split) d += r.label == Label::Desirable ? 1 : 0;
        if (auto targets = opts.targets(t.task, d, split.size() - d)) {
          if (!opts.lexicon) throw EvaluationError("augmentation requested without a lexicon");
          split = augment::augment_to_target(split, *targets, *opts.lexicon, fold_seed(opts.seed, fold, ti),
                                             opts.replacement_rate);
        }
      }
      train.push_back({t.task, std::move(split)});
    }
    const Predictor predictor = trainer(train, fold);

    FoldOutcome& out = outcomes[f];
    for (const std::size_t ti : eval_index) {
      const auto& t = tasks[ti];
      const auto test = test_split(t, fold);
      std::vector<Label> golds, preds;
      std::vector<std::pair<std::string, Label>> labelled;
      if (!test.empty()) {
        const auto probs = predictor(t.task, test);
        if (probs.size() != test.size())
          throw EvaluationError(fmt::format("predictor returned {} scores for {} examples", probs.size(), test.size()));
        for (std::size_t i = 0; i < test.size(); ++i) {
          golds.push_back(test[i].label);
          preds.push_back(probs[i] > 0.5 ? Label::Desirable : Label::Undesirable);
          labelled.emplace_back(test[i].revision_id, preds.back());
        }
      }
      if (test.empty()) {
        warn(fmt::format("task {} fold {}: no test revisions; fold scored as 0", t.task, fold));
        out.f1.push_back(0.0);
      } else {
        const bool has_d = std::count(golds.begin(), golds.end(), Label::Desirable) > 0;
        const bool has_u = std::count(golds.begin(), golds.end(), Label::Undesirable) > 0;
        if (!has_d || !has_u) warn(fmt::format("task {} fold {}: single-class test fold", t.task, fold));
        out.f1.push_back(f1_unweighted(preds, golds));
      }
      out.predicted.push_back(std::move(labelled));
    }
  });

  CvResult result;
  for (std::size_t e = 0; e < eval_index.size(); ++e) {
    TaskScores s;
    s.task = tasks[eval_index[e]].task;
    auto& labels = result.predicted[s.task];
    for (const auto& o : outcomes) {
      s.fold_f1.push_back(o.f1[e]);
      for (const auto& [id, label] : o.predicted[e]) labels[id] = label;
    }
    s.mean_f1 = std::accumulate(s.fold_f1.begin(), s.fold_f1.end(), 0.0) / static_cast<double>(s.fold_f1.size());
    result.scores.push_back(std::move(s));
  }
  return result;
}

ExtrinsicResult extrinsic_eval(const std::map<std::string, Label>& labels, const corpus::Corpus& c) {
  if (c.essays.size() < 3)
    throw EvaluationError(fmt::format("extrinsic evaluation needs at least 3 essays, corpus {} has {}",
                                      c.meta.corpus_id, c.essays.size()));
  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& e : c.essays) counts[e.essay_id] = {0.0, 0.0};
  for (const auto& r : c.revisions) {
    if (r.purpose != corpus::Purpose::Reasoning) continue;
    auto it = labels.find(r.revision_id);
    if (it == labels.end())
      throw EvaluationError(fmt::format("revision {} of corpus {} has no prediction", r.revision_id, c.meta.corpus_id));
    auto& cnt = counts[r.essay_id];
    (it->second == Label::Desirable ? cnt.first : cnt.second) += 1.0;
  }
  std::vector<double> improvement, desirable, undesirable;
  for (const auto& e : c.essays) {
    improvement.push_back(e.improvement);
    desirable.push_back(counts[e.essay_id].first);
    undesirable.push_back(counts[e.essay_id].second);
  }
  auto correlate = [&](const std::vector<double>& x) -> std::optional<CorrelationResult> {
    try {
      return pearson(x, improvement);
    } catch (const UndefinedCorrelation&) {
      return std::nullopt;
    }
  };
  return {correlate(desirable), correlate(undesirable)};
}

ExtrinsicResult extrinsic_gold(const corpus::Corpus& c) {
  std::map<std::string, Label> labels;
  for (const auto& r : c.revisions) labels[r.revision_id] = r.label;
  return extrinsic_eval(labels, c);
}

}  // namespace revlab::eval
