#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "revlab/corpus.hpp"

namespace revlab::align {

/// Cosine similarity of term-frequency vectors over lower-cased whitespace tokens. Symmetric,
/// in [0,1]; two empty strings count as identical (1.0), one empty side gives 0.0.
double sentence_similarity(std::string_view a, std::string_view b);

/// Vector cosine mapped to [0,1] via (1 + cos) / 2. A zero vector yields 0.5 unless both are zero.
double embedding_similarity(std::span<const double> a, std::span<const double> b);

/// Dense |draft_a| x |draft_b| score table, entries in [0,1].
struct SimilarityMatrix {
  Eigen::MatrixXd scores;

  std::size_t rows() const { return static_cast<std::size_t>(scores.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(scores.cols()); }
  double operator()(std::size_t i, std::size_t j) const { return scores(i, j); }
};

SimilarityMatrix lexical_similarity(std::span<const corpus::SentenceRecord> draft_a,
                                    std::span<const corpus::SentenceRecord> draft_b);

/// Backend over precomputed per-sentence vectors (row i of each matrix is sentence i).
SimilarityMatrix embedding_similarity(const Eigen::MatrixXd& vectors_a, const Eigen::MatrixXd& vectors_b);

inline constexpr double kDefaultThreshold = 0.5;

/// Order-preserving alignment maximizing the summed similarity of matched pairs. Only pairs
/// scoring at or above `threshold` may match; everything else becomes Delete (draft_a side) or
/// Add (draft_b side). A match with score 1.0 and equal trimmed text is NoChange, any other match
/// is Modify. On equal totals the backtrace prefers match, then delete, then add.
/// Alignment ids are "<essay_id>-a<index>".
std::vector<corpus::AlignmentPair> align_drafts(std::span<const corpus::SentenceRecord> draft_a,
                                                std::span<const corpus::SentenceRecord> draft_b,
                                                double threshold = kDefaultThreshold);

std::vector<corpus::AlignmentPair> align_drafts(std::span<const corpus::SentenceRecord> draft_a,
                                                std::span<const corpus::SentenceRecord> draft_b,
                                                const SimilarityMatrix& similarity, double threshold);

/// Sum of similarity over matched (NoChange/Modify) pairs.
double matched_similarity(std::span<const corpus::AlignmentPair> alignment, const SimilarityMatrix& similarity);

/// Replaces every essay's alignments with automatic ones. Revisions are left untouched.
corpus::Corpus realign_corpus(const corpus::Corpus& c, double threshold = kDefaultThreshold);

}  // namespace revlab::align
