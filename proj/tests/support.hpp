#pragma once

// Shared helpers for the test binaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "revlab/augment.hpp"
#include "revlab/corpus.hpp"
#include "revlab/error.hpp"
#include "revlab/neural/network.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("revlab-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = revlab::set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { revlab::set_warning_handler(previous_); }

  std::vector<std::string> messages;

  bool any_contains(std::string_view needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }

 private:
  revlab::WarningHandler previous_;
};

/// Random token matrix with `valid` live rows and zero padding up to `max_len`.
inline revlab::neural::EncodedPair random_pair(int d, int valid, int max_len, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  revlab::neural::EncodedPair p;
  p.tokens = revlab::neural::RowMatrix::Zero(max_len, d);
  for (int t = 0; t < valid; ++t)
    for (int j = 0; j < d; ++j) p.tokens(t, j) = n(rng);
  p.valid_length = valid;
  return p;
}

inline revlab::corpus::Revision make_revision(std::string id, std::string essay, revlab::corpus::RevisionOp op,
                                              std::string a, std::string b, revlab::corpus::Label label) {
  revlab::corpus::Revision r;
  r.revision_id = std::move(id);
  r.essay_id = std::move(essay);
  r.op = op;
  r.text_a = std::move(a);
  r.text_b = std::move(b);
  r.label = label;
  return r;
}

/// Number of token positions where `copy` differs from `original`, or nullopt when the copy is not
/// a pure lexicon substitution (different token counts, or a changed token that is not a synonym).
inline std::optional<std::size_t> substitutions(const revlab::corpus::Revision& original,
                                                const revlab::corpus::Revision& copy,
                                                const revlab::augment::SynonymLexicon& lexicon) {
  auto words = [](const std::string& t) {
    std::vector<std::string> out;
    std::istringstream in(t);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  std::size_t changed = 0;
  for (auto [a, b] : {std::pair{&original.text_a, &copy.text_a}, std::pair{&original.text_b, &copy.text_b}}) {
    const auto x = words(*a), y = words(*b);
    if (x.size() != y.size()) return std::nullopt;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == y[i]) continue;
      const auto syns = lexicon.synonyms(x[i]);
      if (std::find(syns.begin(), syns.end(), y[i]) == syns.end()) return std::nullopt;
      ++changed;
    }
  }
  return changed;
}

}  // namespace testing
