#include "revlab/neural/embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::neural {

void EmbeddingTable::add(std::string_view token, std::span<const double> values) {
  if (static_cast<int>(values.size()) != dim_)
    throw ValidationError(fmt::format("embedding for '{}' has dimension {}, expected {}", token, values.size(), dim_));
  std::string key = to_lower(token);
  if (index_.contains(key)) throw ValidationError(fmt::format("duplicate embedding token '{}'", key));
  index_.emplace(key, tokens_.size());
  tokens_.push_back(std::move(key));
  vectors_.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.contains(to_lower(token)); }

const Vector& EmbeddingTable::lookup(std::string_view token) const {
  auto it = index_.find(to_lower(token));
  return it == index_.end() ? unknown() : vectors_[it->second];
}

const Vector& EmbeddingTable::unknown() const {
  auto it = index_.find(std::string(kUnknownToken));
  if (it == index_.end()) throw ValidationError("embedding table has no <unk> vector");
  return vectors_[it->second];
}

const Vector& EmbeddingTable::separator() const {
  auto it = index_.find(std::string(kSepToken));
  if (it == index_.end()) throw ValidationError("embedding table has no <sep> vector");
  return vectors_[it->second];
}

void EmbeddingTable::ensure_reserved(std::uint64_t seed) {
  if (dim_ <= 0) throw ValidationError("embedding table has no dimension");
  std::uint32_t salt = 0;
  for (const auto tok : {kUnknownToken, kSepToken}) {
    ++salt;
    if (contains(tok)) continue;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : v) {
        x = normal(rng);
        norm += x * x;
      }
    } while (norm == 0.0);
    for (auto& x : v) x /= std::sqrt(norm);
    add(tok, v);
  }
}

EmbeddingTable parse_embedding_table(std::istream& in, std::string_view source) {
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      const auto& f = fields[i];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ValidationError(fmt::format("{}:{}: bad number '{}'", source, line_no, f));
      values.push_back(v);
    }
    if (values.empty()) throw ValidationError(fmt::format("{}:{}: token without vector", source, line_no));
    if (!table) table.emplace(static_cast<int>(values.size()));
    if (static_cast<int>(values.size()) != table->dimension())
      throw ValidationError(fmt::format("{}:{}: ragged dimension {} (expected {})", source, line_no, values.size(),
                                        table->dimension()));
    try {
      table->add(fields[0], values);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  if (!table) throw ValidationError(fmt::format("{}: empty embedding file", source));
  table->ensure_reserved();
  return std::move(*table);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open embedding file {}", path.string()));
  return parse_embedding_table(in, path.string());
}

std::string serialize_embedding_table(const EmbeddingTable& table) {
  std::string out;
  for (const auto& tok : table.tokens()) {
    out += tok;
    for (double v : table.lookup(tok)) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write embedding file {}", path.string()));
  out << serialize_embedding_table(table);
}

std::vector<std::string> pair_tokens(const corpus::Revision& rev, int max_len) {
  if (max_len < 3) throw ValidationError(fmt::format("max_len {} must be at least 3", max_len));
  auto a = tokenize(rev.text_a);
  auto b = tokenize(rev.text_b);
  if (a.empty() && b.empty()) throw ValidationError(fmt::format("revision {}: both texts empty", rev.revision_id));
  const auto limit = static_cast<std::size_t>(max_len);
  while (a.size() + 1 + b.size() > limit && !b.empty()) b.pop_back();
  while (a.size() + 1 > limit) a.pop_back();
  std::vector<std::string> seq = std::move(a);
  seq.emplace_back(kSepToken);
  seq.insert(seq.end(), b.begin(), b.end());
  return seq;
}

EncodedPair encode_pair(const corpus::Revision& rev, const EmbeddingTable& table, int max_len) {
  const auto seq = pair_tokens(rev, max_len);
  EncodedPair out;
  out.tokens = RowMatrix::Zero(max_len, table.dimension());
  out.valid_length = static_cast<int>(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t)
    out.tokens.row(static_cast<Eigen::Index>(t)) =
        (seq[t] == kSepToken ? table.separator() : table.lookup(seq[t])).transpose();
  return out;
}

EncodedPair encode_precomputed(const RowMatrix& sequence, int max_len) {
  if (sequence.rows() < 1) throw ValidationError("precomputed sequence is empty");
  EncodedPair out;
  const auto len = std::min<Eigen::Index>(sequence.rows(), max_len);
  out.tokens = RowMatrix::Zero(max_len, sequence.cols());
  out.tokens.topRows(len) = sequence.topRows(len);
  out.valid_length = static_cast<int>(len);
  return out;
}

}  // namespace revlab::neural
