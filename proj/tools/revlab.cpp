#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "revlab/align.hpp"
#include "revlab/augment.hpp"
#include "revlab/checkpoint.hpp"
#include "revlab/corpus.hpp"
#include "revlab/cross_validation.hpp"
#include "revlab/error.hpp"
#include "revlab/experiment.hpp"
#include "revlab/regimes.hpp"
#include "revlab/report.hpp"
#include "revlab/synth.hpp"
#include "revlab/text.hpp"

namespace fs = std::filesystem;
using namespace revlab;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitTraining = 3;
constexpr int kExitEvaluation = 4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << body)) throw ValidationError(fmt::format("cannot write {}", path.string()));
}

// "TASK=path" pairs.
std::pair<std::string, fs::path> task_path(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
    throw ValidationError(fmt::format("expected TASK=PATH, got '{}'", arg));
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

corpus::Corpus load_task_corpus(const std::string& task, const fs::path& path) {
  auto c = corpus::is_standard_corpus(task) ? corpus::load_corpus(path, corpus::standard_meta(task))
                                            : corpus::load_corpus(path);
  if (c.meta.corpus_id != task)
    throw ValidationError(fmt::format("{} holds corpus '{}', expected '{}'", path.string(), c.meta.corpus_id, task));
  return c;
}

struct SynthArgs {
  std::string preset = "paper-shaped";
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  auto cfg = a.config.empty() ? synth::preset(a.preset, a.seed) : synth::SuiteConfig::from_json(read_file(a.config));
  cfg.seed = a.seed;
  const auto suite = synth::generate_suite(cfg);
  synth::write_suite(cfg, suite, a.out);
  for (const auto& c : suite.corpora) {
    const auto n = c.counts();
    std::cout << fmt::format("{}: {} essays, {} revisions\n", c.meta.corpus_id, n.essays, n.revisions);
  }
  return 0;
}

struct AlignArgs {
  std::string corpus;
  std::string task;
  std::string annotations;
  double threshold = align::kDefaultThreshold;
  std::string out;
};

int run_align(const AlignArgs& a) {
  auto c = a.task.empty() ? corpus::load_corpus(a.corpus) : load_task_corpus(a.task, a.corpus);
  c = align::realign_corpus(c, a.threshold);
  if (!a.annotations.empty()) c.revisions = corpus::extract_revisions(c.alignments, corpus::load_annotations(a.annotations));
  corpus::validate(c);
  corpus::save_corpus(c, a.out);
  std::size_t changed = 0;
  for (const auto& p : c.alignments) changed += p.op != corpus::AlignOp::NoChange ? 1 : 0;
  std::cout << fmt::format("{} alignments, {} changed, {} revisions\n", c.alignments.size(), changed,
                           c.revisions.size());
  return 0;
}

struct AugmentArgs {
  std::string in;
  std::string lexicon;
  std::string targets;
  std::string reference;
  std::uint64_t seed = 1;
  double rate = augment::kDefaultReplacementRate;
  std::string out;
};

int run_augment(const AugmentArgs& a) {
  const auto revs = corpus::load_revisions(a.in);
  const auto lexicon = augment::load_lexicon(a.lexicon);
  augment::AugmentTargets targets;
  if (!a.reference.empty()) {
    const auto colon = a.reference.find(':');
    if (colon == std::string::npos) throw ValidationError("--reference expects CORPUS:mtl or CORPUS:tl");
    const auto regime = to_lower(a.reference.substr(colon + 1));
    if (regime != "mtl" && regime != "tl") throw ValidationError("--reference regime must be mtl or tl");
    targets = augment::reference_targets(a.reference.substr(0, colon),
                                         regime == "mtl" ? augment::AugmentRegime::Mtl : augment::AugmentRegime::Tl);
  } else {
    targets = augment::parse_targets(a.targets);
  }
  std::vector<corpus::Revision> originals;
  for (const auto& r : revs)
    if (!r.augmented_from) originals.push_back(r);
  const auto out = augment::augment_to_target(originals, targets, lexicon, a.seed, a.rate);
  corpus::save_revisions(out, a.out);
  std::cout << fmt::format("{} revisions (D={}, U={})\n", out.size(), targets.desirable, targets.undesirable);
  return 0;
}

struct TrainArgs {
  std::string regime;
  std::string config;
  std::vector<std::string> data;
  std::string source;
  std::string target;
  std::string embeddings;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string out;
};

regimes::TaskData load_task_data(const std::string& arg, const neural::EmbeddingTable& table, int max_len) {
  const auto [task, path] = task_path(arg);
  return {task, regimes::make_examples(corpus::load_revisions(path), table, max_len)};
}

int run_train(const TrainArgs& a) {
  auto cfg = a.config.empty() ? regimes::TrainConfig{} : regimes::TrainConfig::from_json(read_file(a.config));
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const auto table = neural::load_embedding_table(a.embeddings);
  regimes::Checkpoint ckpt{a.regime, cfg, regimes::StlModel{}};
  if (a.regime == "tl") {
    if (a.source.empty() || a.target.empty()) throw ValidationError("tl needs --source and --target");
    const auto src = load_task_data(a.source, table, cfg.max_len);
    const auto tgt = load_task_data(a.target, table, cfg.max_len);
    if (src.task == tgt.task) warn(fmt::format("degenerate transfer: source and target are both {}", src.task));
    ckpt.model = regimes::train_tl(src, tgt, cfg);
  } else {
    if (a.data.empty()) throw ValidationError(fmt::format("{} needs at least one --data TASK=PATH", a.regime));
    std::vector<regimes::TaskData> tasks;
    std::vector<std::string> names;
    for (const auto& d : a.data) {
      tasks.push_back(load_task_data(d, table, cfg.max_len));
      names.push_back(tasks.back().task);
    }
    ckpt.config = cfg = experiment::effective_config(cfg, names);
    if (a.regime == "stl") {
      if (tasks.size() != 1) throw ValidationError("stl trains on exactly one --data set");
      ckpt.model = regimes::train_stl(tasks.front(), cfg);
    } else if (a.regime == "union") {
      ckpt.model = regimes::train_union(tasks, cfg);
    } else if (a.regime == "mtl") {
      ckpt.model = regimes::train_mtl(tasks, cfg);
    } else {
      throw ValidationError(fmt::format("unknown regime '{}'", a.regime));
    }
  }
  regimes::save_checkpoint(ckpt, a.out);
  std::cout << fmt::format("wrote {} checkpoint {} (config {})\n", a.regime, a.out, ckpt.config_hash());
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string corpus;
  std::string embeddings;
  std::string folds;
  std::optional<int> fold;
  int k = 10;
  std::uint64_t seed = 1;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto ckpt = regimes::load_checkpoint(a.checkpoint);
  const auto [task, path] = task_path(a.corpus);
  auto c = load_task_corpus(task, path);
  const auto table = neural::load_embedding_table(a.embeddings);

  if (a.fold) {
    const auto folds = a.folds.empty() ? corpus::make_folds(c, a.k, a.seed) : corpus::parse_folds(read_file(a.folds));
    if (*a.fold < 0 || *a.fold >= folds.k)
      throw ValidationError(fmt::format("--fold {} outside [0, {})", *a.fold, folds.k));
    std::erase_if(c.essays, [&](const auto& e) { return folds.fold(e.essay_id) != *a.fold; });
    std::erase_if(c.revisions, [&](const auto& r) { return folds.fold(r.essay_id) != *a.fold; });
    std::erase_if(c.alignments, [&](const auto& p) { return folds.fold(p.essay_id) != *a.fold; });
  }
  if (c.revisions.empty()) throw EvaluationError("no revisions to evaluate");

  const auto examples = regimes::make_examples(c.revisions, table, ckpt.config.max_len);
  const auto preds = std::holds_alternative<regimes::MtlModel>(ckpt.model)
                         ? regimes::predict(std::get<regimes::MtlModel>(ckpt.model), examples, task)
                         : regimes::predict(std::get<regimes::StlModel>(ckpt.model), examples);
  std::vector<corpus::Label> golds, labels;
  std::map<std::string, corpus::Label> by_id;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    golds.push_back(c.revisions[i].label);
    labels.push_back(preds[i].label);
    by_id[c.revisions[i].revision_id] = preds[i].label;
  }
  const double f1 = eval::f1_unweighted(labels, golds);

  eval::EvalReport report;
  report.config_hash = ckpt.config_hash();
  report.seed = ckpt.config.seed;
  report.intrinsic.push_back({ckpt.regime, "", task, {f1}, f1});
  auto add = [&](std::string_view regime, std::string_view label_source, const eval::ExtrinsicResult& r) {
    report.correlations.push_back({std::string(regime), "", task, std::string(label_source), corpus::Label::Desirable,
                                   r.desirable});
    report.correlations.push_back({std::string(regime), "", task, std::string(label_source),
                                   corpus::Label::Undesirable, r.undesirable});
  };
  if (c.essays.size() >= 3) {
    add("gold", "gold", eval::extrinsic_gold(c));
    add(ckpt.regime, "predicted", eval::extrinsic_eval(by_id, c));
  } else {
    report.notes.push_back("Fewer than 3 essays: correlations skipped.");
  }
  if (a.fold) report.notes.push_back(fmt::format("Scores cover fold {} only.", *a.fold));
  report.notes.push_back("Correlations use raw per-essay revision counts; essays without revisions count as zero.");
  eval::emit_report(report, a.out);
  std::cout << fmt::format("{} on {}: macro-F1 {:.4f} over {} revisions\n", ckpt.regime, task, f1, preds.size());
  return 0;
}

struct RunArgs {
  std::string config;
  std::string preset;
  std::vector<std::string> corpora;
  std::string lexicon;
  std::string embeddings;
  std::string regime;
  std::string seeds;
  std::optional<int> folds;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> hidden;
  std::optional<int> max_len;
  std::string augment;
  std::optional<std::size_t> mtl_total;
  std::optional<std::size_t> tl_total;
  std::string tl_pairs;
  std::optional<std::size_t> threads;
  std::string out;
};

int run_run(const RunArgs& a) {
  experiment::ExperimentSpec spec;
  if (!a.config.empty()) {
    spec = experiment::ExperimentSpec::from_json(read_file(a.config));
  } else {
    spec.regimes = experiment::parse_regimes("all");
  }
  if (!a.preset.empty()) {
    spec.data = {};
    spec.data.preset = a.preset;
  }
  if (!a.corpora.empty()) {
    spec.data.preset.reset();
    spec.data.suite.reset();
    spec.data.corpora.clear();
    for (const auto& c : a.corpora) {
      const auto [task, path] = task_path(c);
      spec.data.corpora[task] = path;
    }
  }
  if (!spec.data.preset && !spec.data.suite && spec.data.corpora.empty()) spec.data.preset = "paper-shaped";
  if (!a.lexicon.empty()) spec.data.lexicon = a.lexicon;
  if (!a.embeddings.empty()) spec.data.embeddings = a.embeddings;
  if (!a.regime.empty()) spec.regimes = experiment::parse_regimes(a.regime);
  if (!a.seeds.empty()) spec.seeds = experiment::parse_seeds(a.seeds);
  if (a.folds) spec.folds = *a.folds;
  if (a.epochs) spec.train.epochs = *a.epochs;
  if (a.batch_size) spec.train.batch_size = *a.batch_size;
  if (a.hidden) spec.train.hidden_dim = *a.hidden;
  if (a.max_len) spec.train.max_len = *a.max_len;
  if (!a.augment.empty()) {
    spec.augment.mode = a.augment == "reference" ? experiment::AugmentMode::Reference
                        : a.augment == "scaled"  ? experiment::AugmentMode::Scaled
                        : a.augment == "none"    ? experiment::AugmentMode::None
                                                 : throw ValidationError(fmt::format("unknown --augment '{}'", a.augment));
  }
  if (a.mtl_total) spec.augment.mtl_total = *a.mtl_total;
  if (a.tl_total) spec.augment.tl_total = *a.tl_total;
  if (!a.tl_pairs.empty()) {
    spec.tl_pairs.clear();
    for (const auto& p : split(a.tl_pairs, ',')) {
      const auto colon = p.find(':');
      if (colon == std::string::npos) throw ValidationError(fmt::format("--tl-pairs entry '{}' is not SRC:TGT", p));
      spec.tl_pairs.emplace_back(std::string(trim(p.substr(0, colon))), std::string(trim(p.substr(colon + 1))));
    }
  }
  if (a.threads) spec.threads = *a.threads;
  if (!a.out.empty()) spec.out_dir = a.out;
  spec.validate();
  const auto summary = experiment::run_experiment(spec);
  for (const auto& r : summary.reports) std::cout << eval::render_text(r) << '\n';
  std::cout << fmt::format("manifest: {}\n", summary.manifest.string());
  return 0;
}

struct ReportArgs {
  std::string csv;
  std::string out;
};

int run_report(const ReportArgs& a) {
  fs::path csv = a.csv;
  if (fs::is_directory(csv)) csv /= "report.csv";
  const auto report = eval::parse_csv(read_file(csv));
  const auto text = eval::render_text(report);
  if (a.out.empty())
    std::cout << text;
  else
    write_file(a.out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toolkit for classifying desirable reasoning revisions in essay drafts"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus suite");
  synth_cmd->add_option("--preset", synth_args.preset, "paper-shaped or tiny")->capture_default_str();
  synth_cmd->add_option("--config", synth_args.config, "Suite config JSON (overrides --preset)");
  synth_cmd->add_option("--seed", synth_args.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

  AlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align", "Re-align draft sentences of a corpus");
  align_cmd->add_option("--corpus", align_args.corpus)->required();
  align_cmd->add_option("--task", align_args.task, "Corpus id when the file has no meta record");
  align_cmd->add_option("--annotations", align_args.annotations, "TSV to extract revisions from after aligning");
  align_cmd->add_option("--threshold", align_args.threshold)->capture_default_str();
  align_cmd->add_option("--out", align_args.out)->required();

  AugmentArgs augment_args;
  auto* augment_cmd = app.add_subcommand("augment", "Grow a revision set with synonym replacement");
  augment_cmd->add_option("--in", augment_args.in, "Revision or corpus JSONL")->required();
  augment_cmd->add_option("--lexicon", augment_args.lexicon)->required();
  auto* targets_opt = augment_cmd->add_option("--targets", augment_args.targets, "D=<n>,U=<n>");
  auto* reference_opt = augment_cmd->add_option("--reference", augment_args.reference, "CORPUS:mtl or CORPUS:tl");
  targets_opt->excludes(reference_opt);
  augment_cmd->add_option("--seed", augment_args.seed)->capture_default_str();
  augment_cmd->add_option("--rate", augment_args.rate)->capture_default_str();
  augment_cmd->add_option("--out", augment_args.out)->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model and save a checkpoint");
  train_cmd->add_option("--regime", train_args.regime)->required()->check(CLI::IsMember({"stl", "union", "mtl", "tl"}));
  train_cmd->add_option("--config", train_args.config, "Train config JSON");
  train_cmd->add_option("--data", train_args.data, "TASK=PATH, repeatable");
  train_cmd->add_option("--source", train_args.source, "TASK=PATH (tl)");
  train_cmd->add_option("--target", train_args.target, "TASK=PATH (tl)");
  train_cmd->add_option("--embeddings", train_args.embeddings)->required();
  train_cmd->add_option("--epochs", train_args.epochs);
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--out", train_args.out)->required();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--corpus", eval_args.corpus, "TASK=PATH")->required();
  eval_cmd->add_option("--embeddings", eval_args.embeddings)->required();
  eval_cmd->add_option("--folds", eval_args.folds, "Fold assignment JSON");
  eval_cmd->add_option("--fold", eval_args.fold, "Only score this fold");
  eval_cmd->add_option("--k", eval_args.k, "Folds to build when --folds is absent")->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "Fold seed when --folds is absent")->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "Report directory")->required();

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Cross-validate regimes end to end and write reports");
  run_cmd->add_option("--config", run_args.config, "Experiment spec JSON");
  run_cmd->add_option("--preset", run_args.preset, "Synthetic preset");
  run_cmd->add_option("--corpus", run_args.corpora, "TASK=PATH, repeatable");
  run_cmd->add_option("--lexicon", run_args.lexicon);
  run_cmd->add_option("--embeddings", run_args.embeddings);
  run_cmd->add_option("--regime", run_args.regime, "all or a list such as stl,mtl");
  run_cmd->add_option("--seeds", run_args.seeds, "e.g. 1..10");
  run_cmd->add_option("--folds", run_args.folds);
  run_cmd->add_option("--epochs", run_args.epochs);
  run_cmd->add_option("--batch-size", run_args.batch_size);
  run_cmd->add_option("--hidden", run_args.hidden);
  run_cmd->add_option("--max-len", run_args.max_len);
  run_cmd->add_option("--augment", run_args.augment, "reference, scaled or none");
  run_cmd->add_option("--mtl-total", run_args.mtl_total);
  run_cmd->add_option("--tl-total", run_args.tl_total);
  run_cmd->add_option("--tl-pairs", run_args.tl_pairs, "SRC:TGT,...");
  run_cmd->add_option("--threads", run_args.threads, "Worker count (default REVLAB_THREADS or all cores)");
  run_cmd->add_option("--out", run_args.out);

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Render the text tables of a report CSV");
  report_cmd->add_option("--csv", report_args.csv, "report.csv or its directory")->required();
  report_cmd->add_option("--out", report_args.out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*synth_cmd) return run_synth(synth_args);
    if (*align_cmd) return run_align(align_args);
    if (*augment_cmd) return run_augment(augment_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_evaluate(eval_args);
    if (*run_cmd) return run_run(run_args);
    if (*report_cmd) return run_report(report_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const augment::UnaugmentableError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kExitTraining;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation failed: " << e.what() << '\n';
    return kExitEvaluation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
