#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revlab/augment.hpp"
#include "revlab/corpus.hpp"
#include "revlab/neural/embedding.hpp"

namespace revlab::synth {

struct TaskSpec {
  corpus::CorpusMeta meta;
  std::size_t n_essays = 0;
  int min_revisions = 1;  // per essay
  int max_revisions = 5;
  /// When set, per-essay counts are nudged within [min, max] until the corpus has exactly this many.
  std::optional<std::size_t> target_revisions;
  /// Per-task overrides of the suite-wide signal strengths.
  std::optional<double> shared_signal_strength;
  std::optional<double> task_specific_strength;
  /// Improvement = slope * (desirable count - expected count) + range midpoint + noise, clipped.
  double improvement_slope = 1.0;
};

struct SuiteConfig {
  std::vector<TaskSpec> tasks;
  int vocab_size = 2000;
  int shared_keywords = 8;  // per class
  int task_keywords = 8;    // per class and task
  double shared_signal_strength = 0.6;
  double task_specific_strength = 0.3;
  double label_noise = 0.1;
  double improvement_noise_sigma = 0.5;
  int min_tokens = 5;  // filler tokens per sentence
  int max_tokens = 15;
  double distractor_rate = 0.3;  // chance per essay of one non-reasoning change
  int embedding_dim = 50;
  std::uint64_t seed = 1;

  /// Throws ValidationError for invalid probabilities, empty or duplicated tasks, or a vocabulary
  /// too small for the keyword pools.
  void validate() const;

  double shared_strength(const TaskSpec& t) const { return t.shared_signal_strength.value_or(shared_signal_strength); }
  double task_strength(const TaskSpec& t) const { return t.task_specific_strength.value_or(task_specific_strength); }

  std::string to_json() const;
  static SuiteConfig from_json(std::string_view text);
};

/// Four corpora shaped like the reference collection: ids E, H1, H2, C with 143, 47, 63 and 60
/// essays, 389, 387, 329 and 207 revisions, and their improvement rules and ranges.
SuiteConfig paper_shaped(std::uint64_t seed);
/// Same four tasks with a dozen essays each, for smoke runs.
SuiteConfig tiny(std::uint64_t seed);
/// Throws ValidationError for an unknown preset name.
SuiteConfig preset(std::string_view name, std::uint64_t seed);

/// Keyword pools of the generator, in vocabulary order.
struct Vocabulary {
  std::vector<std::string> filler;
  std::vector<std::string> shared_desirable;
  std::vector<std::string> shared_undesirable;
  std::map<std::string, std::vector<std::string>> task_desirable;
  std::map<std::string, std::vector<std::string>> task_undesirable;

  std::vector<std::string> all() const;
};

Vocabulary build_vocabulary(const SuiteConfig& cfg);

/// Token names: "w0000", "w0001", ...
std::string token_name(int index);

struct Suite {
  std::vector<corpus::Corpus> corpora;  // task order of the config
  /// Every changed alignment with its purpose; reasoning entries carry the revision label.
  std::map<std::string, std::vector<corpus::Annotation>> annotations;

  const corpus::Corpus& corpus(std::string_view task) const;
};

/// Deterministic per seed. A reasoning revision first draws a latent class uniformly; with the
/// task's shared strength it carries a keyword from the shared pool of that class, otherwise with
/// the task-specific strength one from the task's own pool, otherwise no keyword at all. The label
/// is the latent class flipped with probability label_noise.
Suite generate_suite(const SuiteConfig& cfg);

/// Three synonyms per token taken from the same pool, so substitutions keep a keyword's class.
augment::SynonymLexicon make_lexicon(const SuiteConfig& cfg);

/// Seeded unit-norm vectors for every vocabulary token plus the reserved tokens.
neural::EmbeddingTable make_embeddings(const SuiteConfig& cfg);

/// Macro-F1 of the accuracy-optimal classifier per task: predict the keyword's class when one is
/// present and guess uniformly otherwise. Equals 1 - q * noise - (1 - q) / 2 with q the task's
/// total keyword probability.
std::map<std::string, double> bayes_reference(const SuiteConfig& cfg);

/// Writes <task>.jsonl and <task>.annotations.tsv per task plus lexicon.tsv, embeddings.txt and
/// suite.json into `dir`.
void write_suite(const SuiteConfig& cfg, const Suite& suite, const std::filesystem::path& dir);

}  // namespace revlab::synth
