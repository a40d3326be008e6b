#include "revlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "revlab/align.hpp"
#include "revlab/error.hpp"
#include "revlab/parallel.hpp"
#include "revlab/text.hpp"

namespace revlab::experiment {

using corpus::Label;
using corpus::Revision;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kRegimeOrder[] = {"stl", "union", "mtl", "tl"};

// Prefixes a failure with the pipeline stage while keeping its exit-code class.
template <typename F>
auto stage(std::string_view name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", name, e.what()));
  } catch (const TrainingError& e) {
    throw TrainingError(fmt::format("{}: {}", name, e.what()));
  } catch (const EvaluationError& e) {
    throw EvaluationError(fmt::format("{}: {}", name, e.what()));
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t salt, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt, index};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string_view mode_name(AugmentMode m) {
  switch (m) {
    case AugmentMode::Reference: return "reference";
    case AugmentMode::Scaled: return "scaled";
    case AugmentMode::None: return "none";
  }
  return "reference";
}

AugmentMode parse_mode(std::string_view s) {
  if (s == "reference") return AugmentMode::Reference;
  if (s == "scaled") return AugmentMode::Scaled;
  if (s == "none") return AugmentMode::None;
  throw ValidationError(fmt::format("unknown augmentation mode '{}' (expected reference, scaled or none)", s));
}

std::vector<double> probabilities(const std::vector<regimes::Prediction>& preds) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.probability);
  return out;
}

regimes::TaskData task_data(const eval::TrainingSet& set, const neural::EmbeddingTable& table, int max_len) {
  return {set.task, regimes::make_examples(set.revisions, table, max_len)};
}

std::vector<regimes::TaskData> all_task_data(std::span<const eval::TrainingSet> train,
                                             const neural::EmbeddingTable& table, int max_len) {
  std::vector<regimes::TaskData> out;
  for (const auto& set : train) out.push_back(task_data(set, table, max_len));
  return out;
}

eval::Predictor stl_predictor(std::shared_ptr<const std::map<std::string, regimes::StlModel, std::less<>>> models,
                              const neural::EmbeddingTable& table, int max_len) {
  return [models, &table, max_len](std::string_view task, std::span<const Revision> revs) {
    auto it = models->find(task);
    if (it == models->end()) throw EvaluationError(fmt::format("no model trained for task '{}'", task));
    return probabilities(regimes::predict(it->second, regimes::make_examples(revs, table, max_len)));
  };
}

json spec_json(const ExperimentSpec& s, bool with_runtime) {
  json j;
  j["regimes"] = s.regimes;
  json d = json::object();
  if (s.data.preset) d["preset"] = *s.data.preset;
  if (s.data.suite) d["suite"] = json::parse(s.data.suite->to_json());
  if (!s.data.corpora.empty()) {
    json c = json::object();
    for (const auto& [task, path] : s.data.corpora) c[task] = path.generic_string();
    d["corpora"] = c;
  }
  if (!s.data.lexicon.empty()) d["lexicon"] = s.data.lexicon.generic_string();
  if (!s.data.embeddings.empty()) d["embeddings"] = s.data.embeddings.generic_string();
  j["data"] = d;
  j["train"] = json::parse(s.train.to_json());
  j["folds"] = s.folds;
  json a;
  a["mode"] = std::string(mode_name(s.augment.mode));
  a["mtl_total"] = s.augment.mtl_total;
  a["tl_total"] = s.augment.tl_total;
  if (!s.augment.tl_totals.empty()) {
    json t = json::object();
    for (const auto& [task, total] : s.augment.tl_totals) t[task] = total;
    a["tl_totals"] = t;
  }
  a["replacement_rate"] = s.augment.replacement_rate;
  j["augment"] = a;
  j["tl_pairs"] = json::array();
  for (const auto& [src, tgt] : s.tl_pairs) j["tl_pairs"].push_back({src, tgt});
  j["seeds"] = s.seeds;
  if (with_runtime) {
    j["out_dir"] = s.out_dir.generic_string();
    j["threads"] = s.threads;
  }
  return j;
}

std::size_t thread_count(const ExperimentSpec& spec) {
  return spec.threads > 0 ? spec.threads : default_thread_count();
}

void add_extrinsic(eval::EvalReport& report, std::string_view regime, std::string_view source,
                   const corpus::Corpus& c, std::string_view label_source, const eval::ExtrinsicResult& r) {
  for (const auto cls : {Label::Desirable, Label::Undesirable})
    report.correlations.push_back({std::string(regime), std::string(source), c.meta.corpus_id,
                                   std::string(label_source), cls,
                                   cls == Label::Desirable ? r.desirable : r.undesirable});
}

}  // namespace

void ExperimentSpec::validate() const {
  if (regimes.empty()) throw ValidationError("no regimes selected");
  std::set<std::string> seen;
  for (const auto& r : regimes) {
    if (std::find(std::begin(kRegimeOrder), std::end(kRegimeOrder), r) == std::end(kRegimeOrder))
      throw ValidationError(fmt::format("unknown regime '{}' (expected stl, union, mtl or tl)", r));
    if (!seen.insert(r).second) throw ValidationError(fmt::format("regime '{}' listed twice", r));
  }
  if (seeds.empty()) throw ValidationError("seed list must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ValidationError("seed list has duplicates");
  if (folds < 2) throw ValidationError(fmt::format("folds must be at least 2, got {}", folds));
  const bool synthetic = data.preset || data.suite;
  if (data.preset && data.suite) throw ValidationError("data: give either a preset or a suite config, not both");
  if (synthetic == !data.corpora.empty())
    throw ValidationError("data: give either a synthetic suite or corpus files");
  if (!synthetic) {
    if (data.embeddings.empty()) throw ValidationError("data: corpus files need an embedding file");
    if (data.lexicon.empty() && augment.mode != AugmentMode::None)
      throw ValidationError("data: augmentation needs a lexicon file");
  }
  if (data.suite) data.suite->validate();
  if (data.preset) synth::preset(*data.preset, 0);
  if (augment.mode == AugmentMode::Scaled && (augment.mtl_total == 0 || augment.tl_total == 0))
    throw ValidationError("scaled augmentation needs mtl_total and tl_total");
  for (const auto& [task, total] : augment.tl_totals)
    if (total == 0) throw ValidationError(fmt::format("tl_totals: task {} needs a positive total", task));
  if (!(augment.replacement_rate > 0.0 && augment.replacement_rate <= 1.0))
    throw ValidationError("replacement_rate must lie in (0, 1]");
  train.validate();
}

std::string ExperimentSpec::to_json() const { return spec_json(*this, true).dump(); }

std::string ExperimentSpec::hash() const { return fnv1a_hex(spec_json(*this, false).dump()); }

ExperimentSpec ExperimentSpec::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("malformed experiment spec: {}", e.what()));
  }
  if (!j.is_object()) throw ValidationError("experiment spec must be a JSON object");
  ExperimentSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "regimes") {
        s.regimes = v.is_string() ? parse_regimes(v.get<std::string>()) : v.get<std::vector<std::string>>();
      } else if (key == "data") {
        for (const auto& [dk, dv] : v.items()) {
          if (dk == "preset") s.data.preset = dv.get<std::string>();
          else if (dk == "suite") s.data.suite = synth::SuiteConfig::from_json(dv.dump());
          else if (dk == "corpora")
            for (const auto& [task, path] : dv.items()) s.data.corpora[task] = path.get<std::string>();
          else if (dk == "lexicon") s.data.lexicon = dv.get<std::string>();
          else if (dk == "embeddings") s.data.embeddings = dv.get<std::string>();
          else throw ValidationError(fmt::format("unknown data key '{}'", dk));
        }
      } else if (key == "train") {
        s.train = regimes::TrainConfig::from_json(v.dump());
      } else if (key == "folds") {
        s.folds = v.get<int>();
      } else if (key == "augment") {
        for (const auto& [ak, av] : v.items()) {
          if (ak == "mode") s.augment.mode = parse_mode(av.get<std::string>());
          else if (ak == "mtl_total") s.augment.mtl_total = av.get<std::size_t>();
          else if (ak == "tl_total") s.augment.tl_total = av.get<std::size_t>();
          else if (ak == "tl_totals")
            for (const auto& [task, total] : av.items()) s.augment.tl_totals[task] = total.get<std::size_t>();
          else if (ak == "replacement_rate") s.augment.replacement_rate = av.get<double>();
          else throw ValidationError(fmt::format("unknown augment key '{}'", ak));
        }
      } else if (key == "tl_pairs") {
        for (const auto& p : v) {
          if (!p.is_array() || p.size() != 2) throw ValidationError("tl_pairs entries must be [source, target]");
          s.tl_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
        }
      } else if (key == "seeds") {
        s.seeds = v.is_string() ? parse_seeds(v.get<std::string>()) : v.get<std::vector<std::uint64_t>>();
      } else if (key == "out_dir") {
        s.out_dir = v.get<std::string>();
      } else if (key == "threads") {
        s.threads = v.get<std::size_t>();
      } else {
        throw ValidationError(fmt::format("unknown experiment key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("bad experiment spec value: {}", e.what()));
  }
  s.validate();
  return s;
}

std::vector<std::string> parse_regimes(std::string_view text) {
  if (trim(text) == "all") return {std::begin(kRegimeOrder), std::end(kRegimeOrder)};
  std::vector<std::string> out;
  for (const auto& part : split(text, ',')) {
    const auto r = to_lower(trim(part));
    if (r.empty()) throw ValidationError(fmt::format("empty entry in regime list '{}'", text));
    if (std::find(std::begin(kRegimeOrder), std::end(kRegimeOrder), r) == std::end(kRegimeOrder))
      throw ValidationError(fmt::format("unknown regime '{}' (expected stl, union, mtl, tl or all)", r));
    out.push_back(r);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  auto number = [&](std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ValidationError(fmt::format("bad seed '{}' in '{}'", s, text));
    return v;
  };
  std::vector<std::uint64_t> out;
  for (const auto& part : split(text, ',')) {
    const auto range = part.find("..");
    if (range == std::string::npos) {
      out.push_back(number(part));
      continue;
    }
    const auto lo = number(std::string_view(part).substr(0, range));
    const auto hi = number(std::string_view(part).substr(range + 2));
    if (hi < lo) throw ValidationError(fmt::format("empty seed range '{}'", part));
    if (hi - lo > 100000) throw ValidationError(fmt::format("seed range '{}' is too large", part));
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ValidationError("seed list must not be empty");
  return out;
}

const corpus::Corpus& Dataset::corpus(std::string_view task) const {
  for (const auto& c : corpora)
    if (c.meta.corpus_id == task) return c;
  throw ValidationError(fmt::format("dataset has no corpus '{}'", task));
}

std::vector<std::string> Dataset::tasks() const {
  std::vector<std::string> out;
  for (const auto& c : corpora) out.push_back(c.meta.corpus_id);
  return out;
}

Dataset load_dataset(const DataSource& source, std::uint64_t seed) {
  Dataset d;
  if (source.preset || source.suite) {
    auto cfg = source.suite ? *source.suite : synth::preset(*source.preset, seed);
    cfg.seed = seed;
    auto suite = synth::generate_suite(cfg);
    d.corpora = std::move(suite.corpora);
    d.lexicon = synth::make_lexicon(cfg);
    d.embeddings = synth::make_embeddings(cfg);
    return d;
  }
  for (const auto& [task, path] : source.corpora) {
    auto c = corpus::is_standard_corpus(task) ? corpus::load_corpus(path, corpus::standard_meta(task))
                                              : corpus::load_corpus(path);
    if (c.meta.corpus_id != task)
      throw ValidationError(fmt::format("{} holds corpus '{}', expected '{}'", path.string(), c.meta.corpus_id, task));
    if (c.alignments.empty() && !c.essays.empty()) c = align::realign_corpus(c);
    d.corpora.push_back(std::move(c));
  }
  if (!source.lexicon.empty()) d.lexicon = augment::load_lexicon(source.lexicon);
  d.embeddings = neural::load_embedding_table(source.embeddings);
  return d;
}

regimes::TrainConfig effective_config(const regimes::TrainConfig& cfg, std::span<const std::string> tasks) {
  regimes::TrainConfig out = cfg;
  out.task_order.clear();
  for (const auto& t : cfg.task_order)
    if (std::find(tasks.begin(), tasks.end(), t) != tasks.end()) out.task_order.push_back(t);
  for (const auto& t : tasks)
    if (std::find(out.task_order.begin(), out.task_order.end(), t) == out.task_order.end()) out.task_order.push_back(t);
  return out;
}

eval::TargetPolicy target_policy(const AugmentOptions& opts, augment::AugmentRegime regime) {
  if (opts.mode == AugmentMode::None) return {};
  return [opts, regime](std::string_view task, std::size_t d, std::size_t u) -> std::optional<augment::AugmentTargets> {
    if (opts.mode == AugmentMode::Reference) return augment::reference_targets(task, regime);
    std::size_t total = regime == augment::AugmentRegime::Mtl ? opts.mtl_total : opts.tl_total;
    if (regime == augment::AugmentRegime::Tl)
      if (const auto it = opts.tl_totals.find(task); it != opts.tl_totals.end()) total = it->second;
    if (total < d + u)
      throw ValidationError(fmt::format("task {}: augmentation total {} is below the {} training revisions", task,
                                        total, d + u));
    return augment::scaled_targets(d, u, total);
  };
}

eval::FoldTrainer stl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table) {
  return [cfg, &table](std::span<const eval::TrainingSet> train, int) -> eval::Predictor {
    auto models = std::make_shared<std::map<std::string, regimes::StlModel, std::less<>>>();
    for (const auto& set : train) models->emplace(set.task, regimes::train_stl(task_data(set, table, cfg.max_len), cfg));
    return stl_predictor(models, table, cfg.max_len);
  };
}

eval::FoldTrainer union_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table) {
  return [cfg, &table](std::span<const eval::TrainingSet> train, int) -> eval::Predictor {
    const auto data = all_task_data(train, table, cfg.max_len);
    auto model = std::make_shared<const regimes::StlModel>(regimes::train_union(data, cfg));
    return [model, &table, max_len = cfg.max_len](std::string_view, std::span<const Revision> revs) {
      return probabilities(regimes::predict(*model, regimes::make_examples(revs, table, max_len)));
    };
  };
}

eval::FoldTrainer mtl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table) {
  return [cfg, &table](std::span<const eval::TrainingSet> train, int) -> eval::Predictor {
    const auto data = all_task_data(train, table, cfg.max_len);
    auto model = std::make_shared<const regimes::MtlModel>(regimes::train_mtl(data, cfg));
    return [model, &table, max_len = cfg.max_len](std::string_view task, std::span<const Revision> revs) {
      return probabilities(regimes::predict(*model, regimes::make_examples(revs, table, max_len), task));
    };
  };
}

eval::FoldTrainer tl_trainer(const regimes::TrainConfig& cfg, const neural::EmbeddingTable& table,
                             const regimes::StlModel& pretrained) {
  return [cfg, &table, &pretrained](std::span<const eval::TrainingSet> train, int) -> eval::Predictor {
    if (train.size() != 1) throw EvaluationError("transfer cross-validation expects exactly one target task");
    auto models = std::make_shared<std::map<std::string, regimes::StlModel, std::less<>>>();
    models->emplace(train[0].task, regimes::fine_tune(pretrained, task_data(train[0], table, cfg.max_len), cfg));
    return stl_predictor(models, table, cfg.max_len);
  };
}

regimes::StlModel pretrain_source(const corpus::Corpus& source, const Dataset& data, const regimes::TrainConfig& cfg,
                                  const AugmentOptions& opts, std::uint64_t seed) {
  std::vector<Revision> revs = source.revisions;
  if (const auto policy = target_policy(opts, augment::AugmentRegime::Tl)) {
    std::size_t d = 0;
    for (const auto& r : revs) d += r.label == Label::Desirable ? 1 : 0;
    if (auto targets = policy(source.meta.corpus_id, d, revs.size() - d))
      revs = augment::augment_to_target(revs, *targets, data.lexicon, derive_seed(seed, 0x7072u, 0),
                                        opts.replacement_rate);
  }
  return regimes::train_stl({source.meta.corpus_id, regimes::make_examples(revs, data.embeddings, cfg.max_len)}, cfg);
}

eval::EvalReport run_seed(const ExperimentSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Dataset data = stage("data", [&] { return load_dataset(spec.data, seed); });
  const auto tasks = data.tasks();
  auto cfg = effective_config(spec.train, tasks);
  cfg.seed = seed;
  const std::size_t threads = thread_count(spec);

  eval::EvalReport report;
  report.seed = seed;
  report.config_hash = spec.hash();

  std::vector<eval::CvTask> cv_tasks;
  for (const auto& c : data.corpora)
    cv_tasks.push_back({c.meta.corpus_id, &c, stage("folds", [&] { return corpus::make_folds(c, spec.folds, seed); })});

  for (const auto& c : data.corpora)
    add_extrinsic(report, "gold", "", c, "gold", stage("extrinsic", [&] { return eval::extrinsic_gold(c); }));

  eval::CvOptions base;
  base.lexicon = &data.lexicon;
  base.replacement_rate = spec.augment.replacement_rate;
  base.seed = seed;
  base.threads = threads;

  auto record = [&](std::string_view regime, std::string_view source, const eval::CvResult& cv) {
    for (const auto& s : cv.scores) {
      report.intrinsic.push_back({std::string(regime), std::string(source), s.task, s.fold_f1, s.mean_f1});
      const auto& c = data.corpus(s.task);
      add_extrinsic(report, regime, source, c, "predicted",
                    stage("extrinsic", [&] { return eval::extrinsic_eval(cv.predicted.at(s.task), c); }));
    }
  };

  for (const auto regime : kRegimeOrder) {
    if (std::find(spec.regimes.begin(), spec.regimes.end(), regime) == spec.regimes.end()) continue;
    if (regime == "tl") continue;
    auto opts = base;
    opts.targets = target_policy(spec.augment, augment::AugmentRegime::Mtl);
    const eval::FoldTrainer trainer = regime == "stl"     ? stl_trainer(cfg, data.embeddings)
                                      : regime == "union" ? union_trainer(cfg, data.embeddings)
                                                          : mtl_trainer(cfg, data.embeddings);
    const auto cv = stage(fmt::format("{} cross-validation", regime),
                          [&] { return eval::cross_validate(cv_tasks, trainer, opts); });
    record(regime, "", cv);
  }

  if (std::find(spec.regimes.begin(), spec.regimes.end(), "tl") != spec.regimes.end()) {
    auto pairs = spec.tl_pairs;
    if (pairs.empty())
      for (const auto& s : tasks)
        for (const auto& t : tasks)
          if (s != t) pairs.emplace_back(s, t);
    std::vector<std::string> sources;
    for (const auto& [s, t] : pairs) {
      data.corpus(s);
      data.corpus(t);
      if (std::find(sources.begin(), sources.end(), s) == sources.end()) sources.push_back(s);
      if (s == t) {
        warn(fmt::format("degenerate transfer: source and target are both {}", s));
        report.notes.push_back(fmt::format(
            "TL {} -> {} is a degenerate transfer: the source phase has seen the target's test folds.", s, t));
      }
    }
    std::vector<regimes::StlModel> pretrained(sources.size());
    stage("tl pretraining", [&] {
      parallel_for(sources.size(), threads, [&](std::size_t i) {
        const auto index = static_cast<std::uint32_t>(
            std::find(tasks.begin(), tasks.end(), sources[i]) - tasks.begin());
        pretrained[i] =
            pretrain_source(data.corpus(sources[i]), data, cfg, spec.augment, derive_seed(seed, 0x746cu, index));
      });
    });
    for (const auto& [s, t] : pairs) {
      const auto& model = pretrained[std::find(sources.begin(), sources.end(), s) - sources.begin()];
      const auto it = std::find_if(cv_tasks.begin(), cv_tasks.end(), [&](const auto& c) { return c.task == t; });
      auto opts = base;
      opts.targets = target_policy(spec.augment, augment::AugmentRegime::Tl);
      const auto cv = stage(fmt::format("tl {} -> {} cross-validation", s, t), [&] {
        return eval::cross_validate(std::span(&*it, 1), tl_trainer(cfg, data.embeddings, model), opts);
      });
      record("tl", s, cv);
    }
  }

  report.notes.push_back("Correlations use raw per-essay revision counts; essays without revisions count as zero.");
  report.notes.push_back(fmt::format("Training splits augmented in '{}' mode; test folds are never augmented.",
                                     mode_name(spec.augment.mode)));
  return report;
}

RunSummary run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  RunSummary summary;
  json manifest;
  manifest["format"] = "revlab-manifest";
  manifest["revlab_version"] = std::string(kVersion);
  manifest["eigen_version"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  manifest["spec_hash"] = spec.hash();
  manifest["spec"] = spec_json(spec, true);
  manifest["seeds"] = spec.seeds;
  manifest["reports"] = json::array();
  for (const auto seed : spec.seeds) {
    auto report = run_seed(spec, seed);
    const auto dir = spec.out_dir / fmt::format("seed-{}", seed);
    stage("report", [&] { eval::emit_report(report, dir); });
    json entry;
    entry["seed"] = seed;
    entry["csv"] = fmt::format("seed-{}/report.csv", seed);
    entry["text"] = fmt::format("seed-{}/report.txt", seed);
    entry["csv_fnv1a"] = fnv1a_hex(eval::render_csv(report));
    manifest["reports"].push_back(std::move(entry));
    summary.reports.push_back(std::move(report));
  }
  summary.manifest = spec.out_dir / "manifest.json";
  std::ofstream out(summary.manifest, std::ios::binary);
  if (!out || !(out << manifest.dump(2) << '\n'))
    throw EvaluationError(fmt::format("report: cannot write {}", summary.manifest.string()));
  return summary;
}

}  // namespace revlab::experiment
