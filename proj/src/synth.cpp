#include "revlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "revlab/error.hpp"
#include "revlab/parallel.hpp"
#include "revlab/text.hpp"

namespace revlab::synth {

using corpus::AlignmentPair;
using corpus::AlignOp;
using corpus::Label;
using corpus::RevisionOp;
using corpus::SentenceRecord;
using json = nlohmann::ordered_json;

namespace {

// Improvements and score deltas are kept on a 1/16 grid so sums of scores stay exact.
constexpr double kQuantum = 1.0 / 16.0;

double quantize(double v) { return std::round(v / kQuantum) * kQuantum; }

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t salt, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt, index};
  return std::mt19937_64(seq);
}

void check_probability(double p, std::string_view what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(fmt::format("{} must lie in [0, 1], got {}", what, p));
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

enum class EventKind { Same, Reasoning, Distractor };

struct Event {
  EventKind kind = EventKind::Same;
  RevisionOp op = RevisionOp::Modify;
  Label label = Label::Undesirable;
  std::optional<std::string> keyword;
};

struct TaskContext {
  const SuiteConfig& cfg;
  const TaskSpec& spec;
  const Vocabulary& vocab;
  std::mt19937_64 rng;
};

std::vector<std::string> filler_sentence(TaskContext& ctx) {
  const int n = std::uniform_int_distribution<int>(ctx.cfg.min_tokens, ctx.cfg.max_tokens)(ctx.rng);
  std::vector<std::string> words;
  for (int i = 0; i < n; ++i) words.push_back(pick(ctx.vocab.filler, ctx.rng));
  return words;
}

void insert_at_random(std::vector<std::string>& words, const std::string& token, std::mt19937_64& rng) {
  const auto at = std::uniform_int_distribution<std::size_t>(0, words.size())(rng);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), token);
}

// Swaps one token for a different filler word.
void perturb(std::vector<std::string>& words, TaskContext& ctx) {
  const auto at = std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(ctx.rng);
  std::string replacement;
  do replacement = pick(ctx.vocab.filler, ctx.rng);
  while (replacement == words[at]);
  words[at] = replacement;
}

Event reasoning_event(TaskContext& ctx) {
  Event ev;
  ev.kind = EventKind::Reasoning;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double op_draw = u(ctx.rng);
  ev.op = op_draw < 0.5 ? RevisionOp::Modify : op_draw < 0.8 ? RevisionOp::Add : RevisionOp::Delete;
  const bool desirable = u(ctx.rng) < 0.5;
  const double s = ctx.cfg.shared_strength(ctx.spec);
  const double t = ctx.cfg.task_strength(ctx.spec);
  const double source = u(ctx.rng);
  const auto& id = ctx.spec.meta.corpus_id;
  if (source < s)
    ev.keyword = pick(desirable ? ctx.vocab.shared_desirable : ctx.vocab.shared_undesirable, ctx.rng);
  else if (source < s + t)
    ev.keyword = pick(desirable ? ctx.vocab.task_desirable.at(id) : ctx.vocab.task_undesirable.at(id), ctx.rng);
  const bool flip = u(ctx.rng) < ctx.cfg.label_noise;
  ev.label = (desirable != flip) ? Label::Desirable : Label::Undesirable;
  return ev;
}

std::vector<int> revision_counts(TaskContext& ctx) {
  const auto& spec = ctx.spec;
  std::vector<int> counts(spec.n_essays);
  std::uniform_int_distribution<int> draw(spec.min_revisions, spec.max_revisions);
  for (auto& c : counts) c = draw(ctx.rng);
  if (!spec.target_revisions) return counts;
  const long target = static_cast<long>(*spec.target_revisions);
  long total = std::accumulate(counts.begin(), counts.end(), 0L);
  std::uniform_int_distribution<std::size_t> any(0, counts.size() - 1);
  while (total != target) {
    auto& c = counts[any(ctx.rng)];
    if (total < target && c < spec.max_revisions) {
      ++c;
      ++total;
    } else if (total > target && c > spec.min_revisions) {
      --c;
      --total;
    }
  }
  return counts;
}

struct EssayBuild {
  corpus::EssayPair essay;
  std::vector<AlignmentPair> alignments;
  std::vector<corpus::Revision> revisions;
  std::vector<corpus::Annotation> annotations;
  int desirable = 0;
};

EssayBuild build_essay(TaskContext& ctx, const std::string& essay_id, int n_revisions) {
  const int da = ctx.spec.meta.corpus_id == "C" ? 2 : 1;
  EssayBuild b;
  b.essay.essay_id = essay_id;
  b.essay.draft_index_a = da;
  b.essay.draft_index_b = da + 1;

  std::vector<Event> events;
  const int unchanged = std::uniform_int_distribution<int>(2, 5)(ctx.rng);
  for (int i = 0; i < unchanged; ++i) events.push_back({});
  for (int i = 0; i < n_revisions; ++i) events.push_back(reasoning_event(ctx));
  if (std::uniform_real_distribution<double>(0.0, 1.0)(ctx.rng) < ctx.cfg.distractor_rate)
    events.push_back({EventKind::Distractor, RevisionOp::Modify, Label::Undesirable, std::nullopt});
  std::shuffle(events.begin(), events.end(), ctx.rng);

  auto add_sentence = [&](std::vector<SentenceRecord>& draft, int index, const std::vector<std::string>& words) {
    SentenceRecord s{essay_id, index, static_cast<int>(draft.size()), join(words, " ")};
    draft.push_back(s);
    return s;
  };

  for (const auto& ev : events) {
    AlignmentPair a;
    a.alignment_id = fmt::format("{}-a{}", essay_id, b.alignments.size());
    a.essay_id = essay_id;
    auto words = filler_sentence(ctx);
    if (ev.kind == EventKind::Same) {
      a.op = AlignOp::NoChange;
      a.sent_a = add_sentence(b.essay.draft_a, da, words);
      a.sent_b = add_sentence(b.essay.draft_b, da + 1, words);
      b.alignments.push_back(std::move(a));
      continue;
    }
    switch (ev.op) {
      case RevisionOp::Modify: {
        a.op = AlignOp::Modify;
        a.sent_a = add_sentence(b.essay.draft_a, da, words);
        auto changed = words;
        if (ev.keyword) insert_at_random(changed, *ev.keyword, ctx.rng);
        if (!ev.keyword || std::uniform_real_distribution<double>(0.0, 1.0)(ctx.rng) < 0.5) perturb(changed, ctx);
        a.sent_b = add_sentence(b.essay.draft_b, da + 1, changed);
        break;
      }
      case RevisionOp::Delete:
        a.op = AlignOp::Delete;
        if (ev.keyword) insert_at_random(words, *ev.keyword, ctx.rng);
        a.sent_a = add_sentence(b.essay.draft_a, da, words);
        break;
      case RevisionOp::Add:
        a.op = AlignOp::Add;
        if (ev.keyword) insert_at_random(words, *ev.keyword, ctx.rng);
        a.sent_b = add_sentence(b.essay.draft_b, da + 1, words);
        break;
    }
    if (ev.kind == EventKind::Reasoning) {
      corpus::Revision r;
      r.revision_id = a.alignment_id;
      r.essay_id = essay_id;
      r.op = ev.op;
      r.text_a = a.sent_a ? a.sent_a->text : "";
      r.text_b = a.sent_b ? a.sent_b->text : "";
      r.purpose = corpus::Purpose::Reasoning;
      r.label = ev.label;
      if (ev.label == Label::Desirable) ++b.desirable;
      b.revisions.push_back(std::move(r));
      b.annotations.push_back({a.alignment_id, corpus::Purpose::Reasoning, ev.label});
    } else {
      b.annotations.push_back({a.alignment_id, corpus::Purpose::Other, Label::Undesirable});
    }
    b.alignments.push_back(std::move(a));
  }
  return b;
}

void assign_improvement(TaskContext& ctx, corpus::EssayPair& e, int desirable, double centre) {
  const auto& meta = ctx.spec.meta;
  const auto& range = meta.improvement_range;
  const double mid = quantize((range.lo + range.hi) / 2.0);
  double raw = ctx.spec.improvement_slope * (desirable - centre) + mid;
  if (ctx.cfg.improvement_noise_sigma > 0)
    raw += std::normal_distribution<double>(0.0, ctx.cfg.improvement_noise_sigma)(ctx.rng);
  raw = quantize(raw);
  switch (meta.improvement_rule) {
    case corpus::ImprovementRule::Given:
      e.improvement = std::clamp(raw, range.lo, range.hi);
      return;
    case corpus::ImprovementRule::HolisticDiff:
      raw = std::clamp(raw, range.lo, range.hi);
      break;
    case corpus::ImprovementRule::BinarySign:
      break;
  }
  const double base = std::uniform_int_distribution<int>(10, 20)(ctx.rng);
  e.holistic_score_a = base;
  e.holistic_score_b = base + raw;
  e.improvement = corpus::improvement_score(e, meta.improvement_rule, range);
}

corpus::Corpus generate_task(const SuiteConfig& cfg, const Vocabulary& vocab, std::size_t index,
                             std::vector<corpus::Annotation>& annotations) {
  const auto& spec = cfg.tasks[index];
  TaskContext ctx{cfg, spec, vocab, make_rng(cfg.seed, 0x73796e74u, static_cast<std::uint32_t>(index))};
  const auto counts = revision_counts(ctx);
  const double centre =
      quantize(0.5 * std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size()));

  corpus::Corpus c;
  c.meta = spec.meta;
  for (std::size_t i = 0; i < spec.n_essays; ++i) {
    auto built = build_essay(ctx, fmt::format("{}-e{:03}", spec.meta.corpus_id, i), counts[i]);
    assign_improvement(ctx, built.essay, built.desirable, centre);
    c.essays.push_back(std::move(built.essay));
    std::move(built.alignments.begin(), built.alignments.end(), std::back_inserter(c.alignments));
    std::move(built.revisions.begin(), built.revisions.end(), std::back_inserter(c.revisions));
    std::move(built.annotations.begin(), built.annotations.end(), std::back_inserter(annotations));
  }
  corpus::validate(c);
  return c;
}

TaskSpec standard_task(std::string_view id, std::size_t essays, int lo, int hi, std::optional<std::size_t> total) {
  TaskSpec t;
  t.meta = corpus::standard_meta(id);
  t.n_essays = essays;
  t.min_revisions = lo;
  t.max_revisions = hi;
  t.target_revisions = total;
  return t;
}

json meta_json(const corpus::CorpusMeta& m) {
  json j;
  j["corpus_id"] = m.corpus_id;
  j["grade_level"] = m.grade_level;
  j["feedback_source"] = m.feedback_source;
  j["improvement_rule"] = std::string(corpus::to_string(m.improvement_rule));
  j["improvement_range"] = {m.improvement_range.lo, m.improvement_range.hi};
  return j;
}

corpus::CorpusMeta meta_from(const json& j) {
  corpus::CorpusMeta m;
  m.corpus_id = j.at("corpus_id").get<std::string>();
  m.grade_level = j.value("grade_level", "");
  m.feedback_source = j.value("feedback_source", "");
  m.improvement_rule = corpus::parse_improvement_rule(j.at("improvement_rule").get<std::string>());
  const auto& r = j.at("improvement_range");
  if (!r.is_array() || r.size() != 2) throw ValidationError("improvement_range must be [lo, hi]");
  m.improvement_range = {r[0].get<double>(), r[1].get<double>()};
  return m;
}

}  // namespace

std::string token_name(int index) { return fmt::format("w{:04}", index); }

std::vector<std::string> Vocabulary::all() const {
  std::vector<std::string> out;
  auto append = [&](const std::vector<std::string>& v) { out.insert(out.end(), v.begin(), v.end()); };
  append(shared_desirable);
  append(shared_undesirable);
  for (const auto& [task, words] : task_desirable) {
    append(words);
    append(task_undesirable.at(task));
  }
  append(filler);
  std::sort(out.begin(), out.end());
  return out;
}

void SuiteConfig::validate() const {
  if (tasks.empty()) throw ValidationError("suite needs at least one task");
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.meta.corpus_id).second)
      throw ValidationError(fmt::format("duplicate task '{}'", t.meta.corpus_id));
    if (t.meta.corpus_id.empty()) throw ValidationError("task id must not be empty");
    if (t.n_essays < 1) throw ValidationError(fmt::format("task {}: needs at least one essay", t.meta.corpus_id));
    if (t.min_revisions < 0 || t.max_revisions < t.min_revisions)
      throw ValidationError(fmt::format("task {}: bad revisions-per-essay range", t.meta.corpus_id));
    if (t.target_revisions) {
      const auto lo = t.n_essays * static_cast<std::size_t>(t.min_revisions);
      const auto hi = t.n_essays * static_cast<std::size_t>(t.max_revisions);
      if (*t.target_revisions < lo || *t.target_revisions > hi)
        throw ValidationError(fmt::format("task {}: {} revisions cannot be spread over {} essays with [{}, {}] each",
                                          t.meta.corpus_id, *t.target_revisions, t.n_essays, t.min_revisions,
                                          t.max_revisions));
    }
    const double s = shared_strength(t);
    const double k = task_strength(t);
    check_probability(s, "shared_signal_strength");
    check_probability(k, "task_specific_strength");
    if (s + k > 1.0 + 1e-12)
      throw ValidationError(
          fmt::format("task {}: shared and task-specific strengths sum to {} > 1", t.meta.corpus_id, s + k));
    if (t.meta.improvement_range.lo > t.meta.improvement_range.hi)
      throw ValidationError(fmt::format("task {}: improvement range lo > hi", t.meta.corpus_id));
    if (t.meta.improvement_rule == corpus::ImprovementRule::BinarySign &&
        !(t.meta.improvement_range.contains(-1.0) && t.meta.improvement_range.contains(1.0)))
      throw ValidationError(fmt::format("task {}: binary-sign range must contain -1 and +1", t.meta.corpus_id));
  }
  if (!(label_noise >= 0.0 && label_noise < 0.5))
    throw ValidationError(fmt::format("label_noise must lie in [0, 0.5), got {}", label_noise));
  if (!(improvement_noise_sigma >= 0.0)) throw ValidationError("improvement_noise_sigma must be non-negative");
  check_probability(distractor_rate, "distractor_rate");
  if (shared_keywords < 4 || task_keywords < 4)
    throw ValidationError("keyword pools need at least 4 tokens per class");
  if (min_tokens < 2 || max_tokens < min_tokens) throw ValidationError("bad sentence length range");
  if (embedding_dim < 1) throw ValidationError("embedding_dim must be positive");
  const long keywords = 2L * shared_keywords + 2L * task_keywords * static_cast<long>(tasks.size());
  if (vocab_size - keywords < 16)
    throw ValidationError(fmt::format("vocab_size {} leaves fewer than 16 filler tokens after {} keywords", vocab_size,
                                      keywords));
}

std::string SuiteConfig::to_json() const {
  json j;
  j["vocab_size"] = vocab_size;
  j["shared_keywords"] = shared_keywords;
  j["task_keywords"] = task_keywords;
  j["shared_signal_strength"] = shared_signal_strength;
  j["task_specific_strength"] = task_specific_strength;
  j["label_noise"] = label_noise;
  j["improvement_noise_sigma"] = improvement_noise_sigma;
  j["min_tokens"] = min_tokens;
  j["max_tokens"] = max_tokens;
  j["distractor_rate"] = distractor_rate;
  j["embedding_dim"] = embedding_dim;
  j["seed"] = seed;
  j["tasks"] = json::array();
  for (const auto& t : tasks) {
    json tj;
    tj["meta"] = meta_json(t.meta);
    tj["n_essays"] = t.n_essays;
    tj["min_revisions"] = t.min_revisions;
    tj["max_revisions"] = t.max_revisions;
    if (t.target_revisions) tj["target_revisions"] = *t.target_revisions;
    if (t.shared_signal_strength) tj["shared_signal_strength"] = *t.shared_signal_strength;
    if (t.task_specific_strength) tj["task_specific_strength"] = *t.task_specific_strength;
    tj["improvement_slope"] = t.improvement_slope;
    j["tasks"].push_back(std::move(tj));
  }
  return j.dump();
}

SuiteConfig SuiteConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("malformed suite config: {}", e.what()));
  }
  if (!j.is_object()) throw ValidationError("suite config must be a JSON object");
  SuiteConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "vocab_size") c.vocab_size = v.get<int>();
      else if (key == "shared_keywords") c.shared_keywords = v.get<int>();
      else if (key == "task_keywords") c.task_keywords = v.get<int>();
      else if (key == "shared_signal_strength") c.shared_signal_strength = v.get<double>();
      else if (key == "task_specific_strength") c.task_specific_strength = v.get<double>();
      else if (key == "label_noise") c.label_noise = v.get<double>();
      else if (key == "improvement_noise_sigma") c.improvement_noise_sigma = v.get<double>();
      else if (key == "min_tokens") c.min_tokens = v.get<int>();
      else if (key == "max_tokens") c.max_tokens = v.get<int>();
      else if (key == "distractor_rate") c.distractor_rate = v.get<double>();
      else if (key == "embedding_dim") c.embedding_dim = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "tasks") {
        for (const auto& tj : v) {
          TaskSpec t;
          for (const auto& [tk, tv] : tj.items()) {
            if (tk == "meta") t.meta = meta_from(tv);
            else if (tk == "n_essays") t.n_essays = tv.get<std::size_t>();
            else if (tk == "min_revisions") t.min_revisions = tv.get<int>();
            else if (tk == "max_revisions") t.max_revisions = tv.get<int>();
            else if (tk == "target_revisions") t.target_revisions = tv.get<std::size_t>();
            else if (tk == "shared_signal_strength") t.shared_signal_strength = tv.get<double>();
            else if (tk == "task_specific_strength") t.task_specific_strength = tv.get<double>();
            else if (tk == "improvement_slope") t.improvement_slope = tv.get<double>();
            else throw ValidationError(fmt::format("unknown task key '{}'", tk));
          }
          c.tasks.push_back(std::move(t));
        }
      } else {
        throw ValidationError(fmt::format("unknown suite config key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("bad suite config value: {}", e.what()));
  }
  c.validate();
  return c;
}

SuiteConfig paper_shaped(std::uint64_t seed) {
  SuiteConfig c;
  c.seed = seed;
  c.tasks = {standard_task("E", 143, 1, 5, 389), standard_task("H1", 47, 4, 13, 387),
             standard_task("H2", 63, 2, 9, 329), standard_task("C", 60, 1, 6, 207)};
  // Keep the planted slope inside the narrow E and H1 ranges most of the time.
  c.tasks[0].improvement_slope = 0.5;
  c.tasks[1].improvement_slope = 0.5;
  return c;
}

SuiteConfig tiny(std::uint64_t seed) {
  SuiteConfig c;
  c.seed = seed;
  c.vocab_size = 400;
  c.min_tokens = 4;
  c.max_tokens = 8;
  c.embedding_dim = 8;
  c.tasks = {standard_task("E", 12, 1, 3, std::nullopt), standard_task("H1", 12, 1, 3, std::nullopt),
             standard_task("H2", 12, 1, 3, std::nullopt), standard_task("C", 12, 1, 3, std::nullopt)};
  c.tasks[0].improvement_slope = 0.5;
  c.tasks[1].improvement_slope = 0.5;
  return c;
}

SuiteConfig preset(std::string_view name, std::uint64_t seed) {
  if (name == "paper-shaped") return paper_shaped(seed);
  if (name == "tiny") return tiny(seed);
  throw ValidationError(fmt::format("unknown preset '{}' (expected paper-shaped or tiny)", name));
}

Vocabulary build_vocabulary(const SuiteConfig& cfg) {
  cfg.validate();
  Vocabulary v;
  int next = 0;
  auto take = [&](int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(token_name(next++));
    return out;
  };
  v.shared_desirable = take(cfg.shared_keywords);
  v.shared_undesirable = take(cfg.shared_keywords);
  for (const auto& t : cfg.tasks) {
    v.task_desirable[t.meta.corpus_id] = take(cfg.task_keywords);
    v.task_undesirable[t.meta.corpus_id] = take(cfg.task_keywords);
  }
  v.filler = take(cfg.vocab_size - next);
  return v;
}

const corpus::Corpus& Suite::corpus(std::string_view task) const {
  for (const auto& c : corpora)
    if (c.meta.corpus_id == task) return c;
  throw ValidationError(fmt::format("suite has no task '{}'", task));
}

Suite generate_suite(const SuiteConfig& cfg) {
  cfg.validate();
  const auto vocab = build_vocabulary(cfg);
  const std::size_t n = cfg.tasks.size();
  std::vector<corpus::Corpus> corpora(n);
  std::vector<std::vector<corpus::Annotation>> annotations(n);
  parallel_for(n, default_thread_count(),
               [&](std::size_t i) { corpora[i] = generate_task(cfg, vocab, i, annotations[i]); });
  Suite s;
  for (std::size_t i = 0; i < n; ++i) {
    s.annotations[cfg.tasks[i].meta.corpus_id] = std::move(annotations[i]);
    s.corpora.push_back(std::move(corpora[i]));
  }
  return s;
}

augment::SynonymLexicon make_lexicon(const SuiteConfig& cfg) {
  const auto vocab = build_vocabulary(cfg);
  augment::SynonymLexicon lex;
  auto add_pool = [&](const std::vector<std::string>& pool) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::vector<std::string> syn;
      for (std::size_t k = 1; k <= 3; ++k) syn.push_back(pool[(i + k) % pool.size()]);
      lex.add(pool[i], syn);
    }
  };
  add_pool(vocab.shared_desirable);
  add_pool(vocab.shared_undesirable);
  for (const auto& t : cfg.tasks) {
    add_pool(vocab.task_desirable.at(t.meta.corpus_id));
    add_pool(vocab.task_undesirable.at(t.meta.corpus_id));
  }
  add_pool(vocab.filler);
  return lex;
}

neural::EmbeddingTable make_embeddings(const SuiteConfig& cfg) {
  const auto tokens = build_vocabulary(cfg).all();
  auto rng = make_rng(cfg.seed, 0x656d6264u, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  neural::EmbeddingTable table(cfg.embedding_dim);
  std::vector<double> v(static_cast<std::size_t>(cfg.embedding_dim));
  for (const auto& tok : tokens) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : v) {
        x = normal(rng);
        norm += x * x;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    table.add(tok, v);
  }
  table.ensure_reserved();
  return table;
}

std::map<std::string, double> bayes_reference(const SuiteConfig& cfg) {
  cfg.validate();
  std::map<std::string, double> out;
  for (const auto& t : cfg.tasks) {
    const double q = cfg.shared_strength(t) + cfg.task_strength(t);
    out[t.meta.corpus_id] = 1.0 - q * cfg.label_noise - (1.0 - q) / 2.0;
  }
  return out;
}

void write_suite(const SuiteConfig& cfg, const Suite& suite, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  for (const auto& c : suite.corpora) {
    const auto& id = c.meta.corpus_id;
    corpus::save_corpus(c, dir / (id + ".jsonl"));
    std::string tsv = "alignment_id\tpurpose\tlabel\n";
    for (const auto& a : suite.annotations.at(id))
      tsv += fmt::format("{}\t{}\t{}\n", a.alignment_id, corpus::to_string(a.purpose), corpus::to_string(a.label));
    std::ofstream out(dir / (id + ".annotations.tsv"), std::ios::binary);
    if (!out || !(out << tsv)) throw ValidationError(fmt::format("cannot write annotations for {}", id));
  }
  augment::save_lexicon(make_lexicon(cfg), dir / "lexicon.tsv");
  neural::save_embedding_table(make_embeddings(cfg), dir / "embeddings.txt");
  std::ofstream out(dir / "suite.json", std::ios::binary);
  if (!out || !(out << json::parse(cfg.to_json()).dump(2) << '\n'))
    throw ValidationError(fmt::format("cannot write {}", (dir / "suite.json").string()));
}

}  // namespace revlab::synth
