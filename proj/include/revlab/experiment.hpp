#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revlab/augment.hpp"
#include "revlab/corpus.hpp"
#include "revlab/cross_validation.hpp"
#include "revlab/neural/embedding.hpp"
#include "revlab/regimes.hpp"
#include "revlab/report.hpp"
#include "revlab/synth.hpp"

namespace revlab::experiment {

inline constexpr std::string_view kVersion = "0.1.0";

/// How training splits are grown before fitting. Reference uses the published per-corpus
/// counts (standard corpus ids only); Scaled grows every task to the given totals keeping its class
/// ratio; None trains on the raw splits.
enum class AugmentMode { Reference, Scaled, None };

struct AugmentOptions {
  AugmentMode mode = AugmentMode::Reference;
  std::size_t mtl_total = 0;  // Scaled only: STL, Union and MTL training sets
  std::size_t tl_total = 0;   // Scaled only: both TL phases
  std::map<std::string, std::size_t, std::less<>> tl_totals;  // Scaled only: per-corpus tl_total overrides
  double replacement_rate = augment::kDefaultReplacementRate;
};

/// Either a synthetic suite (preset name or full config; its seed is replaced by the run seed)
/// or corpus files keyed by task id plus a lexicon and an embedding file.
struct DataSource {
  std::optional<std::string> preset;
  std::optional<synth::SuiteConfig> suite;
  std::map<std::string, std::filesystem::path> corpora;
  std::filesystem::path lexicon;
  std::filesystem::path embeddings;
};

struct ExperimentSpec {
  std::vector<std::string> regimes;  // any of stl, union, mtl, tl
  DataSource data;
  regimes::TrainConfig train;
  int folds = 10;
  AugmentOptions augment;
  /// Source/target pairs for TL; empty means every ordered pair of distinct tasks.
  std::vector<std::pair<std::string, std::string>> tl_pairs;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir = "out";
  std::size_t threads = 0;  // 0: default_thread_count()

  /// Throws ValidationError for unknown regimes, no seeds, k < 2, or a data source that is both or
  /// neither synthetic and file based.
  void validate() const;

  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentSpec from_json(std::string_view text);
  std::string hash() const;
};

/// Accepts "stl,mtl", "all", and seed lists such as "1..10" or "3,5,8".
std::vector<std::string> parse_regimes(std::string_view text);
std::vector<std::uint64_t> parse_seeds(std::string_view text);

/// Corpora, lexicon and embeddings for one seed.
struct Dataset {
  std::vector<corpus::Corpus> corpora;
  augment::SynonymLexicon lexicon;
  neural::EmbeddingTable embeddings;

  const corpus::Corpus& corpus(std::string_view task) const;
  std::vector<std::string> tasks() const;
};

/// Generates or loads the data. Loaded corpora without alignments are aligned automatically.
Dataset load_dataset(const DataSource& source, std::uint64_t seed);

/// cfg.task_order restricted to the dataset's tasks, followed by any tasks it does not mention.
regimes::TrainConfig effective_config(const regimes::TrainConfig& cfg, std::span<const std::string> tasks);

/// Per-task training-set size for the given regime family under `opts`.
eval::TargetPolicy target_policy(const AugmentOptions& opts, augment::AugmentRegime regime);

// Fold trainers: each trains on the fold's training sets and predicts from the embedded texts.
eval::FoldTrainer stl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table);
eval::FoldTrainer union_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table);
eval::FoldTrainer mtl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table);
/// Fine-tunes a copy of `pretrained` on the target's training split.
eval::FoldTrainer tl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table,
                             const regimes::StlModel& pretrained);

/// Source-phase model for TL: STL on the whole source corpus, grown per the TL targets.
regimes::StlModel pretrain_source(const corpus::Corpus& source, const Dataset& data, const regimes::TrainConfig& cfg,
                                  const AugmentOptions& opts, std::uint64_t seed);

/// Full pipeline for one seed: folds, cross-validation per regime, gold and predicted
/// correlations. Does not write files.
eval::EvalReport run_seed(const ExperimentSpec& spec, std::uint64_t seed);

struct RunSummary {
  std::vector<eval::EvalReport> reports;
  std::filesystem::path manifest;
};

/// run_seed for every seed, writing <out>/seed-<n>/report.{csv,txt} and <out>/manifest.json.
RunSummary run_experiment(const ExperimentSpec& spec);

}  // namespace revlab::experiment
