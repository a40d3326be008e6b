#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "revlab/augment.hpp"
#include "revlab/corpus.hpp"
#include "revlab/metrics.hpp"

namespace revlab::eval {

/// A corpus taking part in cross-validation, with its own essay-level folds.
struct CvTask {
  std::string task;
  const corpus::Corpus* corpus = nullptr;
  corpus::FoldAssignment folds;
};

/// Training data handed to a fold trainer: the fold's training revisions, already augmented.
struct TrainingSet {
  std::string task;
  std::vector<corpus::Revision> revisions;
};

/// Returns P(Desirable) for each revision of `task`.
using Predictor = std::function<std::vector<double>(std::string_view task, std::span<const corpus::Revision>)>;
using FoldTrainer = std::function<Predictor(std::span<const TrainingSet> train, int fold)>;

/// Augmentation targets for a task's training split given its class counts; nullopt leaves the
/// split as is.
using TargetPolicy =
    std::function<std::optional<augment::AugmentTargets>(std::string_view task, std::size_t desirable,
                                                         std::size_t undesirable)>;

struct CvOptions {
  std::vector<std::string> eval_tasks;  // empty: every task
  TargetPolicy targets;
  const augment::SynonymLexicon* lexicon = nullptr;
  double replacement_rate = augment::kDefaultReplacementRate;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TaskScores {
  std::string task;
  std::vector<double> fold_f1;
  double mean_f1 = 0.0;
};

struct CvResult {
  std::vector<TaskScores> scores;
  /// Held-out predicted label for every original revision, per task.
  std::map<std::string, std::map<std::string, corpus::Label>> predicted;

  const TaskScores& scores_for(std::string_view task) const;
};

/// Training split of fold f: revisions of essays outside fold f.
std::vector<corpus::Revision> training_split(const CvTask& task, int fold);
std::vector<corpus::Revision> test_split(const CvTask& task, int fold);

/// For every fold f, trains on folds != f of every task (training splits augmented per
/// `opts.targets`), predicts the original revisions of fold f and scores macro-F1. Folds may run
/// in parallel; results do not depend on the thread count. Each fold's split is checked to be
/// disjoint from and complementary to its test set at essay level.
CvResult cross_validate(std::span<const CvTask> tasks, const FoldTrainer& trainer, const CvOptions& opts);

struct ExtrinsicResult {
  std::optional<CorrelationResult> desirable;    // nullopt: undefined ("n/a")
  std::optional<CorrelationResult> undesirable;
};

/// Per essay, counts revisions labeled Desirable / Undesirable (raw counts, all essays included)
/// and correlates each count vector with the improvement scores.
ExtrinsicResult extrinsic_eval(const std::map<std::string, corpus::Label>& labels, const corpus::Corpus& c);

/// extrinsic_eval with the corpus's own gold labels.
ExtrinsicResult extrinsic_gold(const corpus::Corpus& c);

}  // namespace revlab::eval
