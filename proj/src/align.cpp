#include "revlab/align.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::align {

double sentence_similarity(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, std::pair<double, double>> tf;
  for (const auto& t : ta) tf[t].first += 1.0;
  for (const auto& t : tb) tf[t].second += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  bool same = true;
  for (const auto& [tok, c] : tf) {
    dot += c.first * c.second;
    na += c.first * c.first;
    nb += c.second * c.second;
    same = same && c.first == c.second;
  }
  if (same) return 1.0;
  // Rounding can push a non-identical pair to 1.0; keep 1.0 reserved for equal multisets.
  return std::min(dot / std::sqrt(na * nb), std::nextafter(1.0, 0.0));
}

double embedding_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("embedding similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.5;
  const double cos = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return (1.0 + cos) / 2.0;
}

SimilarityMatrix lexical_similarity(std::span<const corpus::SentenceRecord> draft_a,
                                    std::span<const corpus::SentenceRecord> draft_b) {
  SimilarityMatrix m{Eigen::MatrixXd(draft_a.size(), draft_b.size())};
  for (std::size_t i = 0; i < draft_a.size(); ++i)
    for (std::size_t j = 0; j < draft_b.size(); ++j)
      m.scores(i, j) = sentence_similarity(draft_a[i].text, draft_b[j].text);
  return m;
}

SimilarityMatrix embedding_similarity(const Eigen::MatrixXd& va, const Eigen::MatrixXd& vb) {
  if (va.cols() != vb.cols()) throw ValidationError("embedding similarity: dimension mismatch");
  SimilarityMatrix m{Eigen::MatrixXd(va.rows(), vb.rows())};
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    const Eigen::VectorXd a = va.row(i).transpose();
    for (Eigen::Index j = 0; j < vb.rows(); ++j) {
      const Eigen::VectorXd b = vb.row(j).transpose();
      m.scores(i, j) = embedding_similarity(std::span<const double>(a.data(), a.size()),
                                            std::span<const double>(b.data(), b.size()));
    }
  }
  return m;
}

std::vector<corpus::AlignmentPair> align_drafts(std::span<const corpus::SentenceRecord> draft_a,
                                                std::span<const corpus::SentenceRecord> draft_b,
                                                double threshold) {
  return align_drafts(draft_a, draft_b, lexical_similarity(draft_a, draft_b), threshold);
}

std::vector<corpus::AlignmentPair> align_drafts(std::span<const corpus::SentenceRecord> draft_a,
                                                std::span<const corpus::SentenceRecord> draft_b,
                                                const SimilarityMatrix& sim, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError(fmt::format("alignment threshold {} must lie in (0, 1)", threshold));
  const std::size_t n = draft_a.size(), m = draft_b.size();
  if (sim.rows() != n || sim.cols() != m) throw ValidationError("similarity matrix shape does not match drafts");

  // best(i, j): maximum matched similarity aligning the suffixes a[i..] and b[j..]. Filling from the
  // end lets the forward walk apply the match > delete > add preference at each step.
  Eigen::MatrixXd best = Eigen::MatrixXd::Zero(n + 1, m + 1);
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n && j == m) continue;
      double v = -1.0;
      if (i < n && j < m && sim(i, j) >= threshold) v = std::max(v, sim(i, j) + best(i + 1, j + 1));
      if (i < n) v = std::max(v, best(i + 1, j));
      if (j < m) v = std::max(v, best(i, j + 1));
      best(i, j) = v;
    }
  }

  std::vector<corpus::AlignmentPair> out;
  const std::string essay_id = n ? draft_a[0].essay_id : m ? draft_b[0].essay_id : std::string{};
  auto emit = [&](corpus::AlignOp op, const corpus::SentenceRecord* a, const corpus::SentenceRecord* b) {
    corpus::AlignmentPair p;
    p.alignment_id = fmt::format("{}-a{}", essay_id, out.size());
    p.essay_id = essay_id;
    p.op = op;
    if (a) p.sent_a = *a;
    if (b) p.sent_b = *b;
    out.push_back(std::move(p));
  };
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const double here = best(i, j);
    if (i < n && j < m && sim(i, j) >= threshold && sim(i, j) + best(i + 1, j + 1) == here) {
      const bool same = sim(i, j) == 1.0 && trim(draft_a[i].text) == trim(draft_b[j].text);
      emit(same ? corpus::AlignOp::NoChange : corpus::AlignOp::Modify, &draft_a[i], &draft_b[j]);
      ++i;
      ++j;
    } else if (i < n && best(i + 1, j) == here) {
      emit(corpus::AlignOp::Delete, &draft_a[i], nullptr);
      ++i;
    } else {
      emit(corpus::AlignOp::Add, nullptr, &draft_b[j]);
      ++j;
    }
  }
  return out;
}

double matched_similarity(std::span<const corpus::AlignmentPair> alignment, const SimilarityMatrix& sim) {
  double total = 0.0;
  for (const auto& p : alignment)
    if (p.sent_a && p.sent_b)
      total += sim(static_cast<std::size_t>(p.sent_a->position), static_cast<std::size_t>(p.sent_b->position));
  return total;
}

corpus::Corpus realign_corpus(const corpus::Corpus& c, double threshold) {
  corpus::Corpus out = c;
  out.alignments.clear();
  for (const auto& e : c.essays) {
    auto pairs = align_drafts(e.draft_a, e.draft_b, threshold);
    for (auto& p : pairs) {
      // Drafts with no sentences at all still need the essay id on each pair.
      p.essay_id = e.essay_id;
      out.alignments.push_back(std::move(p));
    }
  }
  corpus::validate(out);
  return out;
}

}  // namespace revlab::align
