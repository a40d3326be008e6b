#include "revlab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::corpus {

using json = nlohmann::ordered_json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw ValidationError(fmt::format("unknown {} '{}'", what, s));
}

constexpr std::array<std::pair<std::string_view, AlignOp>, 4> kAlignOps{{
    {"NoChange", AlignOp::NoChange}, {"Modify", AlignOp::Modify}, {"Delete", AlignOp::Delete}, {"Add", AlignOp::Add}}};
constexpr std::array<std::pair<std::string_view, RevisionOp>, 3> kRevisionOps{{
    {"Modify", RevisionOp::Modify}, {"Delete", RevisionOp::Delete}, {"Add", RevisionOp::Add}}};
constexpr std::array<std::pair<std::string_view, Purpose>, 4> kPurposes{{
    {"Reasoning", Purpose::Reasoning}, {"Evidence", Purpose::Evidence}, {"Claim", Purpose::Claim}, {"Other", Purpose::Other}}};
constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{{
    {"Undesirable", Label::Undesirable}, {"Desirable", Label::Desirable}}};
constexpr std::array<std::pair<std::string_view, ImprovementRule>, 3> kRules{{
    {"Given", ImprovementRule::Given}, {"HolisticDiff", ImprovementRule::HolisticDiff}, {"BinarySign", ImprovementRule::BinarySign}}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

constexpr double kImprovementTolerance = 1e-9;

std::string location(std::string_view source, std::size_t line) {
  return fmt::format("{}:{}", source, line);
}

// Typed field access with line-aware messages.
struct RecordReader {
  const json& j;
  std::string where;

  const json& at(const char* key) const {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(fmt::format("{}: missing field '{}'", where, key));
    return *it;
  }
  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ValidationError(fmt::format("{}: field '{}' must be a string", where, key));
    return v.get<std::string>();
  }
  std::string str_or(const char* key, std::string fallback) const {
    return j.contains(key) && !j[key].is_null() ? str(key) : fallback;
  }
  long integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ValidationError(fmt::format("{}: field '{}' must be an integer", where, key));
    return v.get<long>();
  }
  std::optional<long> opt_integer(const char* key) const {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return integer(key);
  }
  double number(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw ValidationError(fmt::format("{}: field '{}' must be a number", where, key));
    return v.get<double>();
  }
  std::optional<double> opt_number(const char* key) const {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return number(key);
  }
};

json meta_to_json(const CorpusMeta& m) {
  json j;
  j["kind"] = "meta";
  j["corpus_id"] = m.corpus_id;
  j["grade_level"] = m.grade_level;
  j["feedback_source"] = m.feedback_source;
  j["improvement_rule"] = to_string(m.improvement_rule);
  j["improvement_range"] = json::array({m.improvement_range.lo, m.improvement_range.hi});
  return j;
}

CorpusMeta meta_from_json(const RecordReader& r) {
  CorpusMeta m;
  m.corpus_id = r.str("corpus_id");
  m.grade_level = r.str_or("grade_level", "");
  m.feedback_source = r.str_or("feedback_source", "");
  m.improvement_rule = parse_improvement_rule(r.str("improvement_rule"));
  const auto& range = r.at("improvement_range");
  if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
    throw ValidationError(fmt::format("{}: improvement_range must be [lo, hi]", r.where));
  m.improvement_range = {range[0].get<double>(), range[1].get<double>()};
  return m;
}

json revision_to_json(const Revision& r) {
  json j;
  j["kind"] = "revision";
  j["revision_id"] = r.revision_id;
  j["essay_id"] = r.essay_id;
  j["op"] = to_string(r.op);
  j["text_a"] = r.text_a;
  j["text_b"] = r.text_b;
  j["purpose"] = to_string(r.purpose);
  j["label"] = to_string(r.label);
  if (r.augmented_from) j["augmented_from"] = *r.augmented_from;
  return j;
}

Revision revision_from_json(const RecordReader& r) {
  Revision rev;
  rev.revision_id = r.str("revision_id");
  rev.essay_id = r.str("essay_id");
  rev.op = parse_revision_op(r.str("op"));
  rev.text_a = r.str_or("text_a", "");
  rev.text_b = r.str_or("text_b", "");
  rev.purpose = parse_purpose(r.str_or("purpose", "Reasoning"));
  rev.label = parse_label(r.str("label"));
  if (r.j.contains("augmented_from") && !r.j["augmented_from"].is_null()) rev.augmented_from = r.str("augmented_from");
  return rev;
}

void validate_meta(const CorpusMeta& m) {
  if (m.corpus_id.empty()) throw ValidationError("corpus meta: empty corpus_id");
  if (m.improvement_range.lo > m.improvement_range.hi)
    throw ValidationError(fmt::format("corpus {}: improvement range lo > hi", m.corpus_id));
  if (is_standard_corpus(m.corpus_id)) {
    const auto expected = standard_meta(m.corpus_id);
    if (expected.improvement_rule != m.improvement_rule)
      throw ValidationError(fmt::format("corpus {}: improvement rule {} does not match the corpus definition ({})",
                                        m.corpus_id, to_string(m.improvement_rule),
                                        to_string(expected.improvement_rule)));
  }
}

void validate_essay(const EssayPair& e, const CorpusMeta& meta) {
  for (const auto* draft : {&e.draft_a, &e.draft_b}) {
    const int expected_draft = draft == &e.draft_a ? e.draft_index_a : e.draft_index_b;
    for (std::size_t i = 0; i < draft->size(); ++i) {
      const auto& s = (*draft)[i];
      if (s.essay_id != e.essay_id || s.draft_index != expected_draft)
        throw ValidationError(fmt::format("essay {}: sentence filed under the wrong draft", e.essay_id));
      if (s.position != static_cast<int>(i))
        throw ValidationError(fmt::format("essay {} draft {}: positions are not contiguous from 0", e.essay_id,
                                          expected_draft));
      if (trim(s.text).empty())
        throw ValidationError(fmt::format("essay {} draft {} position {}: empty sentence text", e.essay_id,
                                          s.draft_index, s.position));
    }
  }
  if (!meta.improvement_range.contains(e.improvement))
    throw ValidationError(fmt::format("essay {}: improvement {} outside declared range [{}, {}]", e.essay_id,
                                      e.improvement, meta.improvement_range.lo, meta.improvement_range.hi));
  if (meta.improvement_rule != ImprovementRule::Given) {
    const double computed = improvement_score(e, meta.improvement_rule, meta.improvement_range);
    if (std::abs(computed - e.improvement) > kImprovementTolerance)
      throw ValidationError(fmt::format("essay {}: improvement {} disagrees with {} rule ({})", e.essay_id,
                                        e.improvement, to_string(meta.improvement_rule), computed));
  }
}

void validate_alignment(const AlignmentPair& a) {
  switch (a.op) {
    case AlignOp::Delete:
      if (!a.sent_a || a.sent_b)
        throw ValidationError(fmt::format("alignment {}: Delete needs a source sentence and no target", a.alignment_id));
      break;
    case AlignOp::Add:
      if (a.sent_a || !a.sent_b)
        throw ValidationError(fmt::format("alignment {}: Add needs a target sentence and no source", a.alignment_id));
      break;
    case AlignOp::NoChange:
    case AlignOp::Modify:
      if (!a.sent_a || !a.sent_b)
        throw ValidationError(fmt::format("alignment {}: {} needs both sentences", a.alignment_id, to_string(a.op)));
      if (a.op == AlignOp::NoChange && trim(a.sent_a->text) != trim(a.sent_b->text))
        throw ValidationError(fmt::format("alignment {}: NoChange with differing texts", a.alignment_id));
      break;
  }
}

}  // namespace

std::string_view to_string(AlignOp op) { return name_of(op, kAlignOps); }
std::string_view to_string(RevisionOp op) { return name_of(op, kRevisionOps); }
std::string_view to_string(Purpose p) { return name_of(p, kPurposes); }
std::string_view to_string(Label l) { return name_of(l, kLabels); }
std::string_view to_string(ImprovementRule r) { return name_of(r, kRules); }

AlignOp parse_align_op(std::string_view s) { return parse_enum(s, kAlignOps, "alignment op"); }
RevisionOp parse_revision_op(std::string_view s) { return parse_enum(s, kRevisionOps, "revision op"); }
Purpose parse_purpose(std::string_view s) { return parse_enum(s, kPurposes, "purpose"); }
Label parse_label(std::string_view s) { return parse_enum(s, kLabels, "label"); }
ImprovementRule parse_improvement_rule(std::string_view s) { return parse_enum(s, kRules, "improvement rule"); }

bool is_standard_corpus(std::string_view id) { return id == "E" || id == "H1" || id == "H2" || id == "C"; }

CorpusMeta standard_meta(std::string_view id) {
  if (id == "E") return {"E", "5th-6th", "AWE", ImprovementRule::Given, {0.0, 3.0}};
  if (id == "H1") return {"H1", "12th", "peer", ImprovementRule::HolisticDiff, {-2.0, 3.0}};
  if (id == "H2") return {"H2", "12th", "peer", ImprovementRule::HolisticDiff, {-14.0, 12.0}};
  if (id == "C") return {"C", "college", "AWE", ImprovementRule::BinarySign, {-1.0, 1.0}};
  throw ValidationError(fmt::format("'{}' is not one of the standard corpora E, H1, H2, C", id));
}

CorpusCounts Corpus::counts() const {
  CorpusCounts c;
  c.essays = essays.size();
  for (const auto& e : essays) c.sentences += e.draft_a.size() + e.draft_b.size();
  c.revisions = revisions.size();
  return c;
}

const EssayPair* Corpus::find_essay(std::string_view essay_id) const {
  for (const auto& e : essays)
    if (e.essay_id == essay_id) return &e;
  return nullptr;
}

void validate_revision(const Revision& r) {
  if (r.revision_id.empty()) throw ValidationError("revision with empty revision_id");
  const bool a_empty = trim(r.text_a).empty();
  const bool b_empty = trim(r.text_b).empty();
  if (r.op == RevisionOp::Delete && !b_empty)
    throw ValidationError(fmt::format("revision {}: delete with target text", r.revision_id));
  if (r.op == RevisionOp::Add && !a_empty)
    throw ValidationError(fmt::format("revision {}: add with source text", r.revision_id));
  if (a_empty && b_empty) throw ValidationError(fmt::format("revision {}: both texts empty", r.revision_id));
}

void validate(const Corpus& c) {
  validate_meta(c.meta);
  std::unordered_set<std::string> essay_ids;
  for (const auto& e : c.essays) {
    if (!essay_ids.insert(e.essay_id).second)
      throw ValidationError(fmt::format("duplicate essay id '{}'", e.essay_id));
    validate_essay(e, c.meta);
  }
  std::unordered_set<std::string> alignment_ids;
  std::set<std::tuple<std::string, int, int>> used_sentences;
  for (const auto& a : c.alignments) {
    if (!alignment_ids.insert(a.alignment_id).second)
      throw ValidationError(fmt::format("duplicate alignment id '{}'", a.alignment_id));
    const auto* essay = c.find_essay(a.essay_id);
    if (!essay) throw ValidationError(fmt::format("alignment {}: unknown essay '{}'", a.alignment_id, a.essay_id));
    validate_alignment(a);
    for (const auto* s : {a.sent_a ? &*a.sent_a : nullptr, a.sent_b ? &*a.sent_b : nullptr}) {
      if (!s) continue;
      const auto& draft = s->draft_index == essay->draft_index_a ? essay->draft_a : essay->draft_b;
      if (s->position < 0 || s->position >= static_cast<int>(draft.size()) || draft[s->position] != *s)
        throw ValidationError(fmt::format("alignment {}: references a sentence not in essay {}", a.alignment_id,
                                          a.essay_id));
      if (!used_sentences.insert({s->essay_id, s->draft_index, s->position}).second)
        throw ValidationError(fmt::format("alignment {}: sentence aligned twice", a.alignment_id));
    }
  }
  std::unordered_set<std::string> revision_ids;
  for (const auto& r : c.revisions) {
    if (!revision_ids.insert(r.revision_id).second)
      throw ValidationError(fmt::format("duplicate revision id '{}'", r.revision_id));
    if (!essay_ids.contains(r.essay_id))
      throw ValidationError(fmt::format("revision {}: unknown essay '{}'", r.revision_id, r.essay_id));
    validate_revision(r);
    if (r.augmented_from)
      throw ValidationError(fmt::format("revision {}: augmented revisions are not allowed in a raw corpus",
                                        r.revision_id));
  }
}

Corpus parse_corpus(std::istream& in, const std::optional<CorpusMeta>& meta, std::string_view source) {
  Corpus c;
  std::optional<CorpusMeta> file_meta;
  std::map<std::string, std::size_t> essay_index;
  struct PendingSentence {
    SentenceRecord s;
    std::size_t line;
  };
  struct PendingAlignment {
    AlignmentPair a;
    std::optional<int> pos_a, pos_b;
    std::size_t line;
  };
  std::vector<PendingSentence> sentences;
  std::vector<PendingAlignment> alignments;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = location(source, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: malformed record: {}", where, e.what()));
    }
    if (!j.is_object()) throw ValidationError(fmt::format("{}: malformed record: not an object", where));
    RecordReader r{j, where};
    const auto kind = r.str("kind");
    try {
      if (kind == "meta") {
        if (file_meta) throw ValidationError(fmt::format("{}: second meta record", where));
        file_meta = meta_from_json(r);
      } else if (kind == "essay") {
        EssayPair e;
        e.essay_id = r.str("essay_id");
        e.draft_index_a = static_cast<int>(r.opt_integer("draft_index_a").value_or(1));
        e.draft_index_b = static_cast<int>(r.opt_integer("draft_index_b").value_or(2));
        if (e.draft_index_a < 1 || e.draft_index_b <= e.draft_index_a)
          throw ValidationError(fmt::format("{}: draft indices must be 1-based and increasing", where));
        e.holistic_score_a = r.opt_number("holistic_score_a");
        e.holistic_score_b = r.opt_number("holistic_score_b");
        e.improvement = r.number("improvement");
        if (!essay_index.emplace(e.essay_id, c.essays.size()).second)
          throw ValidationError(fmt::format("{}: duplicate essay id '{}'", where, e.essay_id));
        c.essays.push_back(std::move(e));
      } else if (kind == "sentence") {
        SentenceRecord s;
        s.essay_id = r.str("essay_id");
        s.draft_index = static_cast<int>(r.integer("draft_index"));
        s.position = static_cast<int>(r.integer("position"));
        s.text = r.str("text");
        if (s.position < 0) throw ValidationError(fmt::format("{}: negative position", where));
        if (trim(s.text).empty()) throw ValidationError(fmt::format("{}: empty sentence text", where));
        sentences.push_back({std::move(s), line_no});
      } else if (kind == "alignment") {
        PendingAlignment p;
        p.a.alignment_id = r.str("alignment_id");
        p.a.essay_id = r.str("essay_id");
        p.a.op = parse_align_op(r.str("op"));
        auto pa = r.opt_integer("position_a");
        auto pb = r.opt_integer("position_b");
        if (pa) p.pos_a = static_cast<int>(*pa);
        if (pb) p.pos_b = static_cast<int>(*pb);
        p.line = line_no;
        alignments.push_back(std::move(p));
      } else if (kind == "revision") {
        auto rev = revision_from_json(r);
        validate_revision(rev);
        c.revisions.push_back(std::move(rev));
      } else {
        throw ValidationError(fmt::format("{}: unknown record kind '{}'", where, kind));
      }
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      if (msg.rfind(std::string(source), 0) == 0) throw;
      throw ValidationError(fmt::format("{}: {}", where, msg));
    }
  }

  if (file_meta && meta && file_meta->corpus_id != meta->corpus_id)
    throw ValidationError(fmt::format("{}: file declares corpus {} but {} was requested", source,
                                      file_meta->corpus_id, meta->corpus_id));
  if (meta)
    c.meta = *meta;
  else if (file_meta)
    c.meta = *file_meta;
  else
    throw ValidationError(fmt::format("{}: no meta record and no corpus meta supplied", source));

  std::set<std::tuple<std::string, int, int>> seen;
  std::map<std::tuple<std::string, int, int>, std::size_t> sentence_line;
  for (auto& p : sentences) {
    const auto key = std::tuple{p.s.essay_id, p.s.draft_index, p.s.position};
    const auto where = location(source, p.line);
    if (!seen.insert(key).second)
      throw ValidationError(fmt::format("{}: duplicate sentence ({}, {}, {})", where, p.s.essay_id,
                                        p.s.draft_index, p.s.position));
    auto it = essay_index.find(p.s.essay_id);
    if (it == essay_index.end()) throw ValidationError(fmt::format("{}: unknown essay '{}'", where, p.s.essay_id));
    auto& e = c.essays[it->second];
    if (p.s.draft_index == e.draft_index_a)
      e.draft_a.push_back(p.s);
    else if (p.s.draft_index == e.draft_index_b)
      e.draft_b.push_back(p.s);
    else
      throw ValidationError(fmt::format("{}: essay {} has no draft {}", where, p.s.essay_id, p.s.draft_index));
  }
  for (auto& e : c.essays) {
    auto by_pos = [](const SentenceRecord& x, const SentenceRecord& y) { return x.position < y.position; };
    std::sort(e.draft_a.begin(), e.draft_a.end(), by_pos);
    std::sort(e.draft_b.begin(), e.draft_b.end(), by_pos);
  }
  for (auto& p : alignments) {
    const auto where = location(source, p.line);
    auto it = essay_index.find(p.a.essay_id);
    if (it == essay_index.end()) throw ValidationError(fmt::format("{}: unknown essay '{}'", where, p.a.essay_id));
    const auto& e = c.essays[it->second];
    auto fetch = [&](const std::vector<SentenceRecord>& draft, int pos) {
      if (pos < 0 || pos >= static_cast<int>(draft.size()))
        throw ValidationError(fmt::format("{}: alignment references missing sentence position {}", where, pos));
      return draft[pos];
    };
    if (p.pos_a) p.a.sent_a = fetch(e.draft_a, *p.pos_a);
    if (p.pos_b) p.a.sent_b = fetch(e.draft_b, *p.pos_b);
    try {
      validate_alignment(p.a);
    } catch (const ValidationError& err) {
      throw ValidationError(fmt::format("{}: {}", where, err.what()));
    }
    c.alignments.push_back(std::move(p.a));
  }
  validate(c);
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusMeta& meta) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open corpus file {}", path.string()));
  return parse_corpus(in, meta, path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open corpus file {}", path.string()));
  return parse_corpus(in, std::nullopt, path.string());
}

std::string serialize_corpus(const Corpus& c) {
  std::ostringstream out;
  out << meta_to_json(c.meta).dump() << '\n';
  std::map<std::string, std::vector<const AlignmentPair*>> alignments_by_essay;
  for (const auto& a : c.alignments) alignments_by_essay[a.essay_id].push_back(&a);
  std::map<std::string, std::vector<const Revision*>> revisions_by_essay;
  for (const auto& r : c.revisions) revisions_by_essay[r.essay_id].push_back(&r);

  for (const auto& e : c.essays) {
    json je;
    je["kind"] = "essay";
    je["essay_id"] = e.essay_id;
    je["draft_index_a"] = e.draft_index_a;
    je["draft_index_b"] = e.draft_index_b;
    if (e.holistic_score_a) je["holistic_score_a"] = *e.holistic_score_a;
    if (e.holistic_score_b) je["holistic_score_b"] = *e.holistic_score_b;
    je["improvement"] = e.improvement;
    out << je.dump() << '\n';
    for (const auto* draft : {&e.draft_a, &e.draft_b}) {
      for (const auto& s : *draft) {
        json js;
        js["kind"] = "sentence";
        js["essay_id"] = s.essay_id;
        js["draft_index"] = s.draft_index;
        js["position"] = s.position;
        js["text"] = s.text;
        out << js.dump() << '\n';
      }
    }
    for (const auto* a : alignments_by_essay[e.essay_id]) {
      json ja;
      ja["kind"] = "alignment";
      ja["alignment_id"] = a->alignment_id;
      ja["essay_id"] = a->essay_id;
      ja["op"] = to_string(a->op);
      ja["position_a"] = a->sent_a ? json(a->sent_a->position) : json(nullptr);
      ja["position_b"] = a->sent_b ? json(a->sent_b->position) : json(nullptr);
      out << ja.dump() << '\n';
    }
    for (const auto* r : revisions_by_essay[e.essay_id]) out << revision_to_json(*r).dump() << '\n';
  }
  return out.str();
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write corpus file {}", path.string()));
  out << serialize_corpus(c);
}

std::vector<Revision> parse_revisions(std::istream& in, std::string_view source) {
  std::vector<Revision> revs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = location(source, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: malformed record: {}", where, e.what()));
    }
    if (!j.is_object()) throw ValidationError(fmt::format("{}: malformed record: not an object", where));
    RecordReader r{j, where};
    // Corpus files are accepted too; only their revision rows are kept.
    if (r.str("kind") != "revision") continue;
    try {
      auto rev = revision_from_json(r);
      validate_revision(rev);
      revs.push_back(std::move(rev));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", where, e.what()));
    }
  }
  std::unordered_map<std::string, const Revision*> by_id;
  for (const auto& r : revs)
    if (!by_id.emplace(r.revision_id, &r).second)
      throw ValidationError(fmt::format("{}: duplicate revision id '{}'", source, r.revision_id));
  for (const auto& r : revs) {
    if (!r.augmented_from) continue;
    auto it = by_id.find(*r.augmented_from);
    if (it == by_id.end() || it->second->augmented_from)
      throw ValidationError(fmt::format("{}: revision {} is augmented from '{}', which is not an original revision",
                                        source, r.revision_id, *r.augmented_from));
    if (it->second->label != r.label || it->second->op != r.op)
      throw ValidationError(
          fmt::format("{}: revision {} changes label or op of its source", source, r.revision_id));
  }
  return revs;
}

std::vector<Revision> load_revisions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open revisions file {}", path.string()));
  return parse_revisions(in, path.string());
}

std::string serialize_revisions(std::span<const Revision> revisions) {
  std::string out;
  for (const auto& r : revisions) {
    out += revision_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_revisions(std::span<const Revision> revisions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write revisions file {}", path.string()));
  out << serialize_revisions(revisions);
}

double improvement_score(const EssayPair& pair, ImprovementRule rule, const ImprovementRange& range) {
  double score = 0.0;
  if (rule == ImprovementRule::Given) {
    score = pair.improvement;
  } else {
    if (!pair.holistic_score_a || !pair.holistic_score_b)
      throw ValidationError(fmt::format("essay {}: {} rule needs both holistic scores", pair.essay_id,
                                        to_string(rule)));
    const double a = *pair.holistic_score_a;
    const double b = *pair.holistic_score_b;
    score = rule == ImprovementRule::HolisticDiff ? b - a : (b > a ? 1.0 : -1.0);
  }
  if (!range.contains(score))
    throw ValidationError(fmt::format("essay {}: improvement {} outside declared range [{}, {}]", pair.essay_id,
                                      score, range.lo, range.hi));
  return score;
}

std::vector<Annotation> parse_annotations(std::istream& in, std::string_view source) {
  std::vector<Annotation> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("alignment_id", 0) == 0) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError(fmt::format("{}: expected 3 tab-separated columns, got {}", location(source, line_no),
                                        cols.size()));
    try {
      rows.push_back({std::string(trim(cols[0])), parse_purpose(trim(cols[1])), parse_label(trim(cols[2]))});
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", location(source, line_no), e.what()));
    }
  }
  return rows;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open annotation table {}", path.string()));
  return parse_annotations(in, path.string());
}

std::vector<Revision> extract_revisions(std::span<const AlignmentPair> alignments,
                                        std::span<const Annotation> annotations) {
  std::unordered_map<std::string, const Annotation*> by_id;
  for (const auto& a : annotations)
    if (!by_id.emplace(a.alignment_id, &a).second)
      throw ValidationError(fmt::format("duplicate annotation for alignment '{}'", a.alignment_id));
  std::unordered_set<std::string> known;
  for (const auto& a : alignments) known.insert(a.alignment_id);
  for (const auto& a : annotations)
    if (!known.contains(a.alignment_id))
      throw ValidationError(fmt::format("annotation references unknown alignment '{}'", a.alignment_id));

  std::vector<Revision> out;
  for (const auto& a : alignments) {
    if (a.op == AlignOp::NoChange) continue;
    auto it = by_id.find(a.alignment_id);
    if (it == by_id.end())
      throw ValidationError(fmt::format("changed alignment '{}' has no annotation", a.alignment_id));
    if (it->second->purpose != Purpose::Reasoning) continue;
    Revision r;
    r.revision_id = a.alignment_id;
    r.essay_id = a.essay_id;
    r.op = a.op == AlignOp::Modify ? RevisionOp::Modify : a.op == AlignOp::Delete ? RevisionOp::Delete : RevisionOp::Add;
    if (a.sent_a) r.text_a = a.sent_a->text;
    if (a.sent_b) r.text_b = a.sent_b->text;
    r.purpose = Purpose::Reasoning;
    r.label = it->second->label;
    validate_revision(r);
    out.push_back(std::move(r));
  }
  return out;
}

int FoldAssignment::fold(std::string_view essay_id) const {
  auto it = fold_of.find(std::string(essay_id));
  if (it == fold_of.end()) throw ValidationError(fmt::format("essay '{}' has no fold", essay_id));
  return it->second;
}

std::vector<std::string> FoldAssignment::essays_in(int f) const {
  std::vector<std::string> out;
  for (const auto& [id, fold] : fold_of)
    if (fold == f) out.push_back(id);
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (const auto& [id, fold] : fold_of) ++sizes.at(static_cast<std::size_t>(fold));
  return sizes;
}

FoldAssignment make_folds(std::span<const std::string> essay_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError(fmt::format("fold count k={} must be at least 2", k));
  if (essay_ids.size() < static_cast<std::size_t>(k))
    throw ValidationError(fmt::format("fewer essays ({}) than folds ({})", essay_ids.size(), k));
  std::vector<std::string> ids(essay_ids.begin(), essay_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("duplicate essay ids while building folds");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x666f6c64u};
  std::mt19937_64 rng(seq);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldAssignment folds;
  folds.k = k;
  for (std::size_t i = 0; i < ids.size(); ++i) folds.fold_of[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return folds;
}

FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(corpus.essays.size());
  for (const auto& e : corpus.essays) ids.push_back(e.essay_id);
  return make_folds(ids, k, seed);
}

std::string serialize_folds(const FoldAssignment& folds) {
  json j;
  j["k"] = folds.k;
  json m = json::object();
  for (const auto& [id, f] : folds.fold_of) m[id] = f;
  j["folds"] = std::move(m);
  return j.dump(2) + "\n";
}

FoldAssignment parse_folds(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("malformed folds file: {}", e.what()));
  }
  FoldAssignment folds;
  if (!j.contains("k") || !j["k"].is_number_integer() || !j.contains("folds") || !j["folds"].is_object())
    throw ValidationError("folds file needs integer 'k' and object 'folds'");
  folds.k = j["k"].get<int>();
  for (const auto& [id, f] : j["folds"].items()) {
    if (!f.is_number_integer() || f.get<int>() < 0 || f.get<int>() >= folds.k)
      throw ValidationError(fmt::format("essay '{}' has an invalid fold index", id));
    folds.fold_of[id] = f.get<int>();
  }
  return folds;
}

}  // namespace revlab::corpus
