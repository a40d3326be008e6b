#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace revlab::corpus {

enum class AlignOp { NoChange, Modify, Delete, Add };
enum class RevisionOp { Modify, Delete, Add };
enum class Purpose { Reasoning, Evidence, Claim, Other };
enum class Label { Undesirable, Desirable };
enum class ImprovementRule { Given, HolisticDiff, BinarySign };

std::string_view to_string(AlignOp op);
std::string_view to_string(RevisionOp op);
std::string_view to_string(Purpose p);
std::string_view to_string(Label l);
std::string_view to_string(ImprovementRule r);

// Parsers throw ValidationError on unknown names.
AlignOp parse_align_op(std::string_view s);
RevisionOp parse_revision_op(std::string_view s);
Purpose parse_purpose(std::string_view s);
Label parse_label(std::string_view s);
ImprovementRule parse_improvement_rule(std::string_view s);

struct SentenceRecord {
  std::string essay_id;
  int draft_index = 1;  // 1-based draft number as used by the source corpus
  int position = 0;
  std::string text;

  bool operator==(const SentenceRecord&) const = default;
};

struct EssayPair {
  std::string essay_id;
  int draft_index_a = 1;
  int draft_index_b = 2;
  std::vector<SentenceRecord> draft_a;
  std::vector<SentenceRecord> draft_b;
  std::optional<double> holistic_score_a;
  std::optional<double> holistic_score_b;
  double improvement = 0.0;

  bool operator==(const EssayPair&) const = default;
};

struct AlignmentPair {
  std::string alignment_id;
  std::string essay_id;
  AlignOp op = AlignOp::NoChange;
  std::optional<SentenceRecord> sent_a;
  std::optional<SentenceRecord> sent_b;

  bool operator==(const AlignmentPair&) const = default;
};

struct Revision {
  std::string revision_id;
  std::string essay_id;
  RevisionOp op = RevisionOp::Modify;
  std::string text_a;
  std::string text_b;
  Purpose purpose = Purpose::Reasoning;
  Label label = Label::Undesirable;
  std::optional<std::string> augmented_from;

  bool operator==(const Revision&) const = default;
};

struct ImprovementRange {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const ImprovementRange&) const = default;
};

struct CorpusMeta {
  std::string corpus_id;
  std::string grade_level;
  std::string feedback_source;
  ImprovementRule improvement_rule = ImprovementRule::Given;
  ImprovementRange improvement_range;

  bool operator==(const CorpusMeta&) const = default;
};

/// Metadata for the four reference corpora: E (elementary, AWE feedback, given score in [0,3]),
/// H1 and H2 (high school, peer feedback, holistic-score differences) and C (college, AWE,
/// binary sign of Draft3 vs Draft2). Throws ValidationError for any other id.
CorpusMeta standard_meta(std::string_view corpus_id);
bool is_standard_corpus(std::string_view corpus_id);

struct CorpusCounts {
  std::size_t essays = 0;
  std::size_t sentences = 0;
  std::size_t revisions = 0;

  bool operator==(const CorpusCounts&) const = default;
};

struct Corpus {
  CorpusMeta meta;
  std::vector<EssayPair> essays;
  std::vector<AlignmentPair> alignments;
  std::vector<Revision> revisions;

  CorpusCounts counts() const;
  const EssayPair* find_essay(std::string_view essay_id) const;

  bool operator==(const Corpus&) const = default;
};

/// Checks every corpus invariant; throws ValidationError naming the offending record.
void validate(const Corpus& corpus);

/// Parses the JSONL corpus format. When `meta` is given it must agree with any meta record in the
/// stream (or stands in for it when absent). Errors carry "<source>:<line>".
Corpus parse_corpus(std::istream& in, const std::optional<CorpusMeta>& meta, std::string_view source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path, const CorpusMeta& meta);
Corpus load_corpus(const std::filesystem::path& path);

/// Canonical serialization: meta, then per essay its essay record, draft-a and draft-b sentences,
/// alignments and revisions in stored order.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Revision-only JSONL (the augment input/output format). Augmented rows are allowed here, but
/// each must point at a non-augmented row in the same list with the same label and op.
std::vector<Revision> parse_revisions(std::istream& in, std::string_view source = "<stream>");
std::vector<Revision> load_revisions(const std::filesystem::path& path);
std::string serialize_revisions(std::span<const Revision> revisions);
void save_revisions(std::span<const Revision> revisions, const std::filesystem::path& path);

void validate_revision(const Revision& rev);

/// Given passes the stored improvement through; HolisticDiff is b - a; BinarySign is +1 when
/// b > a and -1 otherwise (ties included). The result must lie in `range`.
double improvement_score(const EssayPair& pair, ImprovementRule rule, const ImprovementRange& range);

struct Annotation {
  std::string alignment_id;
  Purpose purpose = Purpose::Other;
  Label label = Label::Undesirable;
};

/// TSV with columns alignment_id, purpose, label. A first line starting with "alignment_id" is
/// treated as a header.
std::vector<Annotation> parse_annotations(std::istream& in, std::string_view source = "<stream>");
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

/// Turns annotated changed alignments into reasoning revisions (revision_id = alignment_id).
std::vector<Revision> extract_revisions(std::span<const AlignmentPair> alignments,
                                        std::span<const Annotation> annotations);

struct FoldAssignment {
  int k = 10;
  std::map<std::string, int> fold_of;

  int fold(std::string_view essay_id) const;
  std::vector<std::string> essays_in(int f) const;
  std::vector<std::size_t> fold_sizes() const;

  bool operator==(const FoldAssignment&) const = default;
};

/// Essay-level partition into k folds of near-equal size (sizes differ by at most one).
FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed);
FoldAssignment make_folds(std::span<const std::string> essay_ids, int k, std::uint64_t seed);

std::string serialize_folds(const FoldAssignment& folds);
FoldAssignment parse_folds(std::string_view json);

}  // namespace revlab::corpus
