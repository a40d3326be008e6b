#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revlab/corpus.hpp"
#include "revlab/metrics.hpp"

namespace revlab::eval {

/// Cross-validated macro-F1 of one regime on one corpus. `source` is set for transfer runs.
struct IntrinsicRow {
  std::string regime;
  std::string source;
  std::string corpus;
  std::vector<double> fold_f1;
  double mean_f1 = 0.0;
};

/// One correlation cell. Gold rows use regime "gold" and label_source "gold".
struct CorrelationRow {
  std::string regime;
  std::string source;
  std::string population;
  std::string label_source;  // gold | predicted
  corpus::Label cls = corpus::Label::Desirable;
  std::optional<CorrelationResult> result;  // nullopt renders as n/a
};

struct EvalReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<IntrinsicRow> intrinsic;
  std::vector<CorrelationRow> correlations;
  std::vector<std::string> notes;
};

/// Columns: seed, config_hash, record (f1 | correlation), regime, source, corpus, fold, f1,
/// population, label_source, class, r, p, n, significant. Fold rows are followed by a "mean" row.
std::string render_csv(const EvalReport& report);
EvalReport parse_csv(std::string_view csv);

/// Aligned tables: STL/Union/MTL intrinsic, the transfer source x target matrix, and the
/// correlation tables with '*' marking p < .05.
std::string render_text(const EvalReport& report);

/// Writes report.csv and report.txt into `dir` (created if needed). Throws EvaluationError when
/// the directory cannot be written.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace revlab::eval
