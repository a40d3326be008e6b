#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "revlab/corpus.hpp"

namespace revlab::neural {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::string_view kUnknownToken = "<unk>";
inline constexpr std::string_view kSepToken = "<sep>";

/// Static per-token vectors. Lookups are case-normalized; unseen tokens map to <unk>.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dimension = 0) : dim_(dimension) {}

  int dimension() const { return dim_; }
  /// Number of stored tokens, reserved ones included.
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Throws ValidationError on a dimension mismatch or duplicate token.
  void add(std::string_view token, std::span<const double> values);
  bool contains(std::string_view token) const;

  /// Vector for `token`, falling back to <unk>.
  const Vector& lookup(std::string_view token) const;
  const Vector& unknown() const;
  const Vector& separator() const;

  /// Adds <unk> and <sep> if missing, as seeded unit-norm pseudo-random vectors.
  void ensure_reserved(std::uint64_t seed = kReservedSeed);

  static constexpr std::uint64_t kReservedSeed = 0x5eed;

 private:
  int dim_;
  std::vector<std::string> tokens_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Text format: one "token v1 v2 ... vd" line per token. The reserved tokens are synthesized when
/// the file does not define them.
EmbeddingTable parse_embedding_table(std::istream& in, std::string_view source = "<stream>");
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
std::string serialize_embedding_table(const EmbeddingTable& table);
void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);

/// A revision as a fixed-length token matrix: T rows of d features, rows past valid_length are zero.
struct EncodedPair {
  RowMatrix tokens;
  int valid_length = 0;

  int max_length() const { return static_cast<int>(tokens.rows()); }
  int dimension() const { return static_cast<int>(tokens.cols()); }
};

/// Token order used for encoding: tokens(text_a), <sep>, tokens(text_b), truncated to max_len
/// by dropping text_b's tail first and then text_a's. <sep> is always kept.
std::vector<std::string> pair_tokens(const corpus::Revision& rev, int max_len);

EncodedPair encode_pair(const corpus::Revision& rev, const EmbeddingTable& table, int max_len);

/// Wraps externally produced per-token vectors (rows) for one revision, padding to max_len.
EncodedPair encode_precomputed(const RowMatrix& sequence, int max_len);

}  // namespace revlab::neural
