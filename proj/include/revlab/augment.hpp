#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "revlab/corpus.hpp"

namespace revlab::augment {

/// Token -> synonyms, keyed by lower-cased token. Self-synonyms are dropped on insert.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  /// Throws ValidationError when nothing but the token itself is offered.
  void add(std::string_view token, std::span<const std::string> synonyms);

  /// Synonyms of `token` (case-normalized lookup), empty when the token has no entry.
  std::span<const std::string> synonyms(std::string_view token) const;
  bool contains(std::string_view token) const { return !synonyms(token).empty(); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

/// TSV: token TAB comma-separated synonyms. Blank lines and lines starting with '#' are skipped.
SynonymLexicon parse_lexicon(std::istream& in, std::string_view source = "<stream>");
SynonymLexicon load_lexicon(const std::filesystem::path& path);
std::string serialize_lexicon(const SynonymLexicon& lexicon);
void save_lexicon(const SynonymLexicon& lexicon, const std::filesystem::path& path);

struct AugmentTargets {
  std::size_t total = 0;
  std::size_t desirable = 0;
  std::size_t undesirable = 0;
};

/// Parses "D=2376,U=2744" (order free, total derived).
AugmentTargets parse_targets(std::string_view spec);

/// Thrown when an example, or a whole class, has nothing the lexicon can replace.
class UnaugmentableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultReplacementRate = 0.15;

/// Replaces ceil(rate * R) of the R lexicon-covered tokens (text_a and text_b pooled) with
/// uniformly drawn synonyms. Texts are re-joined with single spaces; label, op and essay are kept.
corpus::Revision synonym_replace(const corpus::Revision& rev, const SynonymLexicon& lexicon, double rate,
                                 std::mt19937_64& rng, std::string_view new_id);

/// Id given to the n-th (0-based) augmentation of `source_id`.
std::string augmented_id(std::string_view source_id, std::size_t n);

/// Returns the originals followed by synonym-replaced copies, so that the Desirable and
/// Undesirable counts equal `targets` exactly. Copies are drawn round-robin over the augmentable
/// originals of each class in input order; each class uses its own generator derived from `seed`.
std::vector<corpus::Revision> augment_to_target(std::span<const corpus::Revision> revs, const AugmentTargets& targets,
                                                const SynonymLexicon& lexicon, std::uint64_t seed,
                                                double rate = kDefaultReplacementRate);

/// Per-fold training-set targets from the reference augmentation table, for corpora E, H1, H2, C.
enum class AugmentRegime { Mtl, Tl };
AugmentTargets reference_targets(std::string_view corpus_id, AugmentRegime regime);

/// Grows a class histogram to `total` examples keeping the class ratio; never shrinks a class.
AugmentTargets scaled_targets(std::size_t desirable, std::size_t undesirable, std::size_t total);

}  // namespace revlab::augment
