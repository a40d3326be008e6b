#include "revlab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::augment {

using corpus::Label;
using corpus::Revision;

void SynonymLexicon::add(std::string_view token, std::span<const std::string> synonyms) {
  const std::string key = to_lower(trim(token));
  if (key.empty()) throw ValidationError("lexicon entry with empty token");
  auto& list = entries_[key];
  for (const auto& s : synonyms) {
    const std::string syn(trim(s));
    if (syn.empty() || to_lower(syn) == key) continue;
    if (std::find(list.begin(), list.end(), syn) == list.end()) list.push_back(syn);
  }
  if (list.empty()) {
    entries_.erase(key);
    throw ValidationError(fmt::format("lexicon token '{}' has no synonym other than itself", key));
  }
}

std::span<const std::string> SynonymLexicon::synonyms(std::string_view token) const {
  auto it = entries_.find(to_lower(token));
  if (it == entries_.end()) return {};
  return it->second;
}

SynonymLexicon parse_lexicon(std::istream& in, std::string_view source) {
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError(fmt::format("{}:{}: expected 'token<TAB>syn1,syn2,...'", source, line_no));
    const auto syns = split(std::string_view(line).substr(tab + 1), ',');
    try {
      lex.add(std::string_view(line).substr(0, tab), syns);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return lex;
}

SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open lexicon {}", path.string()));
  return parse_lexicon(in, path.string());
}

std::string serialize_lexicon(const SynonymLexicon& lexicon) {
  std::string out;
  for (const auto& [tok, syns] : lexicon.entries()) out += fmt::format("{}\t{}\n", tok, join(syns, ","));
  return out;
}

void save_lexicon(const SynonymLexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write lexicon {}", path.string()));
  out << serialize_lexicon(lexicon);
}

AugmentTargets parse_targets(std::string_view spec) {
  AugmentTargets t;
  bool have_d = false, have_u = false;
  for (const auto& part : split(spec, ',')) {
    const auto kv = split(trim(part), '=');
    if (kv.size() != 2) throw ValidationError(fmt::format("bad target '{}', expected D=<n> or U=<n>", part));
    std::size_t value = 0;
    try {
      std::size_t used = 0;
      const long v = std::stol(kv[1], &used);
      if (used != kv[1].size() || v < 0) throw std::invalid_argument("negative");
      value = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("bad target count '{}'", kv[1]));
    }
    const auto key = trim(kv[0]);
    if (key == "D") {
      t.desirable = value;
      have_d = true;
    } else if (key == "U") {
      t.undesirable = value;
      have_u = true;
    } else {
      throw ValidationError(fmt::format("unknown target class '{}'", key));
    }
  }
  if (!have_d || !have_u) throw ValidationError("targets need both D=<n> and U=<n>");
  t.total = t.desirable + t.undesirable;
  return t;
}

namespace {

struct TokenSlot {
  bool in_b;
  std::size_t index;
};

std::size_t replacement_count(double rate, std::size_t replaceable) {
  // The epsilon keeps products like 0.15 * 20 = 3.0000000000000004 from rounding up.
  const auto n = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(replaceable) - 1e-9));
  return std::clamp<std::size_t>(n, 1, replaceable);
}

std::size_t replaceable_tokens(const Revision& rev, const SynonymLexicon& lexicon) {
  std::size_t n = 0;
  for (const auto* text : {&rev.text_a, &rev.text_b})
    for (const auto& tok : tokenize(*text)) n += lexicon.contains(tok) ? 1 : 0;
  return n;
}

}  // namespace

std::string augmented_id(std::string_view source_id, std::size_t n) { return fmt::format("{}~aug{}", source_id, n); }

Revision synonym_replace(const Revision& rev, const SynonymLexicon& lexicon, double rate, std::mt19937_64& rng,
                         std::string_view new_id) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ValidationError(fmt::format("replacement rate {} must lie in (0, 1]", rate));
  if (rev.augmented_from)
    throw ValidationError(fmt::format("revision {} is already an augmentation", rev.revision_id));
  auto tokens_a = tokenize(rev.text_a);
  auto tokens_b = tokenize(rev.text_b);
  std::vector<TokenSlot> slots;
  for (std::size_t i = 0; i < tokens_a.size(); ++i)
    if (lexicon.contains(tokens_a[i])) slots.push_back({false, i});
  for (std::size_t i = 0; i < tokens_b.size(); ++i)
    if (lexicon.contains(tokens_b[i])) slots.push_back({true, i});
  if (slots.empty()) throw UnaugmentableError(fmt::format("unaugmentable example {}", rev.revision_id));

  const std::size_t count = replacement_count(rate, slots.size());
  // Partial Fisher-Yates: the first `count` slots become a uniform sample without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
    std::swap(slots[i], slots[pick(rng)]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    auto& tok = slots[i].in_b ? tokens_b[slots[i].index] : tokens_a[slots[i].index];
    const auto syns = lexicon.synonyms(tok);
    std::uniform_int_distribution<std::size_t> pick(0, syns.size() - 1);
    tok = syns[pick(rng)];
  }

  Revision out = rev;
  out.revision_id = std::string(new_id);
  out.text_a = join(tokens_a, " ");
  out.text_b = join(tokens_b, " ");
  out.augmented_from = rev.revision_id;
  return out;
}

std::vector<Revision> augment_to_target(std::span<const Revision> revs, const AugmentTargets& targets,
                                        const SynonymLexicon& lexicon, std::uint64_t seed, double rate) {
  if (targets.desirable + targets.undesirable != targets.total)
    throw ValidationError("augment targets: desirable + undesirable != total");
  std::vector<Revision> out(revs.begin(), revs.end());
  for (const auto& r : revs)
    if (r.augmented_from)
      throw ValidationError(fmt::format("augment input {} is already an augmentation", r.revision_id));

  for (const Label cls : {Label::Desirable, Label::Undesirable}) {
    const std::size_t target = cls == Label::Desirable ? targets.desirable : targets.undesirable;
    std::vector<const Revision*> originals;
    for (const auto& r : revs)
      if (r.label == cls) originals.push_back(&r);
    if (target < originals.size())
      throw ValidationError(fmt::format("target {} for {} is below the original count {}", target,
                                        corpus::to_string(cls), originals.size()));
    const std::size_t need = target - originals.size();
    if (need == 0) continue;
    std::vector<const Revision*> pool;
    for (const auto* r : originals)
      if (replaceable_tokens(*r, lexicon) > 0) pool.push_back(r);
    if (pool.empty())
      throw UnaugmentableError(fmt::format("unsatisfiable target: no augmentable {} examples", corpus::to_string(cls)));

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(cls)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> made(pool.size(), 0);
    for (std::size_t n = 0; n < need; ++n) {
      const std::size_t k = n % pool.size();
      out.push_back(synonym_replace(*pool[k], lexicon, rate, rng, augmented_id(pool[k]->revision_id, made[k]++)));
    }
  }
  return out;
}

AugmentTargets reference_targets(std::string_view id, AugmentRegime regime) {
  struct Row {
    std::string_view id;
    AugmentTargets mtl, tl;
  };
  static constexpr Row kRows[] = {
      {"E", {5120, 2376, 2744}, {7725, 3881, 3844}},
      {"H1", {5120, 2750, 2370}, {5780, 2963, 2817}},
      {"H2", {5120, 2770, 2350}, {10986, 5997, 4989}},
      {"C", {5120, 2894, 2226}, {5515, 3186, 2329}},
  };
  for (const auto& row : kRows)
    if (row.id == id) return regime == AugmentRegime::Mtl ? row.mtl : row.tl;
  throw ValidationError(fmt::format("no reference augmentation targets for corpus '{}'", id));
}

AugmentTargets scaled_targets(std::size_t desirable, std::size_t undesirable, std::size_t total) {
  const std::size_t have = desirable + undesirable;
  if (have == 0) throw ValidationError("cannot scale an empty class histogram");
  if (total <= have) return {have, desirable, undesirable};
  auto d = static_cast<std::size_t>(std::llround(static_cast<double>(total) * static_cast<double>(desirable) /
                                                 static_cast<double>(have)));
  d = std::clamp(d, desirable, total - undesirable);
  return {total, d, total - d};
}

}  // namespace revlab::augment
