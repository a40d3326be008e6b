#include "revlab/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "revlab/error.hpp"
#include "revlab/text.hpp"

namespace revlab::eval {

namespace {

constexpr std::string_view kHeader =
    "seed,config_hash,record,regime,source,corpus,fold,f1,population,label_source,class,r,p,n,significant";

std::string field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") != std::string_view::npos)
    throw EvaluationError(fmt::format("report field '{}' contains a CSV delimiter", s));
  return std::string(s);
}

std::string display_regime(std::string_view r) {
  if (r == "stl") return "STL";
  if (r == "union") return "Union";
  if (r == "mtl") return "MTL";
  if (r == "tl") return "TL";
  if (r == "gold") return "Gold";
  return std::string(r);
}

std::string cell(const std::optional<CorrelationResult>& c) {
  if (!c) return "n/a";
  return fmt::format("{:.3f}{}", c->r, significant(c->p_value) ? "*" : "");
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    out += line;
    out += '\n';
  }
  return out;
}

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::vector<std::string> parse_csv_line(std::string_view line) { return split(line, ','); }

}  // namespace

std::string render_csv(const EvalReport& report) {
  std::string out(kHeader);
  out += '\n';
  const std::string prefix = fmt::format("{},{}", report.seed, field(report.config_hash));
  for (const auto& row : report.intrinsic) {
    for (std::size_t f = 0; f < row.fold_f1.size(); ++f)
      out += fmt::format("{},f1,{},{},{},{},{},,,,,,,\n", prefix, field(row.regime), field(row.source),
                         field(row.corpus), f, format_double(row.fold_f1[f]));
    out += fmt::format("{},f1,{},{},{},mean,{},,,,,,,\n", prefix, field(row.regime), field(row.source),
                       field(row.corpus), format_double(row.mean_f1));
  }
  for (const auto& row : report.correlations) {
    const auto base = fmt::format("{},correlation,{},{},,,,{},{},{}", prefix, field(row.regime), field(row.source),
                                  field(row.population), field(row.label_source), corpus::to_string(row.cls));
    if (row.result)
      out += fmt::format("{},{},{},{},{}\n", base, format_double(row.result->r), format_double(row.result->p_value),
                         row.result->n, significant(row.result->p_value) ? "yes" : "no");
    else
      out += fmt::format("{},n/a,n/a,,no\n", base);
  }
  return out;
}

EvalReport parse_csv(std::string_view csv) {
  EvalReport report;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  bool have_meta = false;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> intrinsic_index;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw EvaluationError(fmt::format("report line {}: bad number '{}'", line_no, s));
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kHeader) throw EvaluationError("report CSV has an unexpected header");
      continue;
    }
    const auto cols = parse_csv_line(line);
    if (cols.size() != 15) throw EvaluationError(fmt::format("report line {}: expected 15 columns", line_no));
    if (!have_meta) {
      report.seed = std::stoull(cols[0]);
      report.config_hash = cols[1];
      have_meta = true;
    }
    if (cols[2] == "f1") {
      const auto key = std::tuple{cols[3], cols[4], cols[5]};
      auto [it, inserted] = intrinsic_index.emplace(key, report.intrinsic.size());
      if (inserted) report.intrinsic.push_back({cols[3], cols[4], cols[5], {}, 0.0});
      auto& row = report.intrinsic[it->second];
      if (cols[6] == "mean")
        row.mean_f1 = number(cols[7]);
      else
        row.fold_f1.push_back(number(cols[7]));
    } else if (cols[2] == "correlation") {
      CorrelationRow row{cols[3], cols[4], cols[8], cols[9], corpus::parse_label(cols[10]), std::nullopt};
      if (cols[11] != "n/a")
        row.result = CorrelationResult{number(cols[11]), number(cols[12]), static_cast<std::size_t>(number(cols[13]))};
      report.correlations.push_back(std::move(row));
    } else {
      throw EvaluationError(fmt::format("report line {}: unknown record '{}'", line_no, cols[2]));
    }
  }
  return report;
}

std::string render_text(const EvalReport& report) {
  std::string out = fmt::format("Revision classification report\nseed {}  config {}\n", report.seed, report.config_hash);

  // STL / Union / MTL intrinsic table.
  std::vector<std::string> regimes, corpora;
  std::map<std::pair<std::string, std::string>, const IntrinsicRow*> by_cell;
  std::size_t folds = 0;
  for (const auto& row : report.intrinsic) {
    folds = std::max(folds, row.fold_f1.size());
    if (row.regime == "tl") continue;
    push_unique(regimes, row.regime);
    push_unique(corpora, row.corpus);
    by_cell[{row.regime, row.corpus}] = &row;
  }
  if (!regimes.empty()) {
    out += fmt::format("\nIntrinsic evaluation: macro-F1, mean over {} folds\n", folds);
    std::vector<std::vector<std::string>> table{{"Corpus"}};
    for (const auto& r : regimes) table[0].push_back(display_regime(r));
    for (const auto& c : corpora) {
      std::vector<std::string> line{c};
      for (const auto& r : regimes) {
        auto it = by_cell.find({r, c});
        line.push_back(it == by_cell.end() ? "-" : fmt::format("{:.3f}", it->second->mean_f1));
      }
      table.push_back(std::move(line));
    }
    out += render_table(table);
  }

  // Transfer matrix: rows are sources, columns targets, with the target-only STL row on top.
  std::vector<std::string> sources, targets;
  std::map<std::pair<std::string, std::string>, double> tl;
  for (const auto& row : report.intrinsic) {
    if (row.regime != "tl") continue;
    push_unique(sources, row.source);
    push_unique(targets, row.corpus);
    tl[{row.source, row.corpus}] = row.mean_f1;
  }
  auto corpus_rank = [&](const std::string& c) {
    return std::find(corpora.begin(), corpora.end(), c) - corpora.begin();
  };
  std::stable_sort(targets.begin(), targets.end(),
                   [&](const auto& a, const auto& b) { return corpus_rank(a) < corpus_rank(b); });
  std::stable_sort(sources.begin(), sources.end(),
                   [&](const auto& a, const auto& b) { return corpus_rank(a) < corpus_rank(b); });
  if (!sources.empty()) {
    out += "\nTransfer learning: macro-F1 (rows: Source, columns: Target; ^ = TL above target-only STL)\n";
    std::vector<std::vector<std::string>> table{{"Source"}};
    for (const auto& t : targets) table[0].push_back(t);
    std::vector<std::string> stl_line{"STL"};
    for (const auto& t : targets) {
      auto it = by_cell.find({"stl", t});
      stl_line.push_back(it == by_cell.end() ? "-" : fmt::format("{:.3f}", it->second->mean_f1));
    }
    table.push_back(std::move(stl_line));
    for (const auto& s : sources) {
      std::vector<std::string> line{s};
      for (const auto& t : targets) {
        auto it = tl.find({s, t});
        if (it == tl.end()) {
          line.push_back("");
          continue;
        }
        auto base = by_cell.find({"stl", t});
        const bool up = base != by_cell.end() && it->second > base->second->mean_f1;
        line.push_back(fmt::format("{:.3f}{}", it->second, up ? "^" : ""));
      }
      table.push_back(std::move(line));
    }
    out += render_table(table);
  }

  for (const auto cls : {corpus::Label::Desirable, corpus::Label::Undesirable}) {
    std::vector<std::string> columns, populations;
    std::map<std::pair<std::string, std::string>, const CorrelationRow*> cells;
    std::vector<std::string> tl_sources, tl_targets;
    std::map<std::pair<std::string, std::string>, const CorrelationRow*> tl_cells;
    for (const auto& row : report.correlations) {
      if (row.cls != cls) continue;
      if (row.regime == "tl") {
        push_unique(tl_sources, row.source);
        push_unique(tl_targets, row.population);
        tl_cells[{row.source, row.population}] = &row;
        continue;
      }
      push_unique(columns, row.regime);
      push_unique(populations, row.population);
      cells[{row.regime, row.population}] = &row;
    }
    auto rank = [&](const std::string& c) { return std::find(populations.begin(), populations.end(), c) - populations.begin(); };
    std::stable_sort(tl_targets.begin(), tl_targets.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    std::stable_sort(tl_sources.begin(), tl_sources.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    if (!columns.empty()) {
      out += fmt::format("\nExtrinsic evaluation ({}): Pearson r of per-essay counts vs improvement; * p < .05\n",
                         corpus::to_string(cls));
      std::vector<std::vector<std::string>> table{{"Corpus"}};
      for (const auto& c : columns) table[0].push_back(display_regime(c));
      for (const auto& p : populations) {
        std::vector<std::string> line{p};
        for (const auto& c : columns) {
          auto it = cells.find({c, p});
          line.push_back(it == cells.end() ? "-" : cell(it->second->result));
        }
        table.push_back(std::move(line));
      }
      out += render_table(table);
    }
    if (!tl_sources.empty()) {
      out += fmt::format("\nTransfer learning extrinsic ({}): rows Source, columns Target; * p < .05\n",
                         corpus::to_string(cls));
      std::vector<std::vector<std::string>> table{{"Source"}};
      for (const auto& t : tl_targets) table[0].push_back(t);
      for (const std::string base : {"gold", "stl"}) {
        std::vector<std::string> line{display_regime(base)};
        for (const auto& t : tl_targets) {
          auto it = cells.find({base, t});
          line.push_back(it == cells.end() ? "-" : cell(it->second->result));
        }
        table.push_back(std::move(line));
      }
      for (const auto& s : tl_sources) {
        std::vector<std::string> line{s};
        for (const auto& t : tl_targets) {
          auto it = tl_cells.find({s, t});
          line.push_back(it == tl_cells.end() ? "" : cell(it->second->result));
        }
        table.push_back(std::move(line));
      }
      out += render_table(table);
    }
  }

  if (!report.notes.empty()) {
    out += "\nNotes\n";
    for (const auto& n : report.notes) out += fmt::format("- {}\n", n);
  }
  return out;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw EvaluationError(fmt::format("cannot create report directory {}: {}", dir.string(), ec.message()));
  for (const auto& [name, body] : {std::pair{"report.csv", render_csv(report)}, std::pair{"report.txt", render_text(report)}}) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvaluationError(fmt::format("cannot write {}", path.string()));
    out << body;
    if (!out) throw EvaluationError(fmt::format("failed writing {}", path.string()));
  }
}

}  // namespace revlab::eval
