#include <doctest.h>

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "revlab/cross_validation.hpp"
#include "revlab/error.hpp"
#include "revlab/metrics.hpp"
#include "revlab/synth.hpp"
#include "support.hpp"

using namespace revlab;
using namespace revlab::eval;
using corpus::Label;

namespace {

// Per-class F1 from first principles, averaged; an empty class scores 0.
double oracle_f1(const std::vector<Label>& p, const std::vector<Label>& g) {
  double sum = 0.0;
  for (Label cls : {Label::Desirable, Label::Undesirable}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == cls && g[i] == cls) ++tp;
      if (p[i] == cls && g[i] != cls) ++fp;
      if (p[i] != cls && g[i] == cls) ++fn;
    }
    sum += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return sum / 2;
}

double oracle_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

double oracle_p(double r, std::size_t n) {
  const double df = static_cast<double>(n) - 2;
  const double t = r * std::sqrt(df / (1 - r * r));
  return 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
}

std::vector<Label> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<Label> out(n);
  for (auto& l : out) l = rng() % 2 ? Label::Desirable : Label::Undesirable;
  return out;
}

std::map<std::string, Label> gold_labels(const corpus::Corpus& c) {
  std::map<std::string, Label> out;
  for (const auto& r : c.revisions) out[r.revision_id] = r.label;
  return out;
}

// Predicts from a fixed label table, ignoring training data.
FoldTrainer table_trainer(std::map<std::string, Label> table) {
  return [table](std::span<const TrainingSet>, int) -> Predictor {
    return [table](std::string_view, std::span<const corpus::Revision> revs) {
      std::vector<double> p;
      for (const auto& r : revs) p.push_back(table.at(r.revision_id) == Label::Desirable ? 1.0 : 0.0);
      return p;
    };
  };
}

}  // namespace

TEST_CASE("confusion counts and F1 match a first-principles oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const auto p = random_labels(n, rng), g = random_labels(n, rng);
    const auto c = confusion(p, g);
    CHECK(c.total() == n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) tp += p[i] == Label::Desirable && g[i] == Label::Desirable;
    CHECK(c.tp == tp);
    testing::WarningCapture quiet;
    CHECK(f1_unweighted(p, g) == doctest::Approx(oracle_f1(p, g)).epsilon(1e-12));
  }
}

TEST_CASE("F1 edge cases") {
  const std::vector<Label> all_u(4, Label::Undesirable);
  testing::WarningCapture capture;
  CHECK(f1_unweighted(all_u, all_u) == doctest::Approx(0.5));
  CHECK(capture.any_contains("absent"));
  const std::vector<Label> g{Label::Desirable, Label::Undesirable, Label::Undesirable};
  const std::vector<Label> p{Label::Desirable, Label::Desirable, Label::Undesirable};
  // Desirable: tp 1, fp 1 -> 2/3; Undesirable: tp 1, fn 1 -> 2/3.
  CHECK(f1_unweighted(p, g) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(f1_unweighted(std::vector<Label>{}, std::vector<Label>{}), EvaluationError);
  CHECK_THROWS_AS(confusion(p, all_u), EvaluationError);
}

TEST_CASE("pearson matches the closed form and a Student t oracle") {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 7};
  const auto r = pearson(x, y);
  CHECK(r.r == doctest::Approx(0.9933992677987828).epsilon(1e-12));
  CHECK(r.n == 3);
  CHECK(r.p_value == doctest::Approx(oracle_p(r.r, 3)).epsilon(1e-10));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng() % 50;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = norm(rng);
      b[i] = 0.5 * a[i] + norm(rng);
    }
    const auto res = pearson(a, b);
    CHECK(res.r == doctest::Approx(oracle_r(a, b)).epsilon(1e-10));
    CHECK(std::abs(res.p_value - oracle_p(res.r, n)) < 1e-10);
  }
}

TEST_CASE("pearson invariances and failures") {
  const std::vector<double> x{1, 5, 2, 8, 3}, y{2, 9, 1, 7, 4};
  std::vector<double> affine, flipped;
  for (double v : y) {
    affine.push_back(3 * v + 11);
    flipped.push_back(-2 * v);
  }
  const double r = pearson(x, y).r;
  CHECK(pearson(x, affine).r == doctest::Approx(r).epsilon(1e-12));
  CHECK(pearson(x, flipped).r == doctest::Approx(-r).epsilon(1e-12));
  CHECK(pearson(y, x).r == doctest::Approx(r).epsilon(1e-12));
  std::vector<double> line;
  for (double v : x) line.push_back(2 * v + 1);
  CHECK(pearson(x, line).r == doctest::Approx(1.0));
  CHECK(pearson(x, line).p_value == doctest::Approx(0.0));

  CHECK_THROWS_AS(pearson(x, std::vector<double>(5, 1.0)), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), EvaluationError);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2, 3}), EvaluationError);
  CHECK(significant(0.049));
  CHECK_FALSE(significant(0.05));
}

TEST_CASE("incomplete beta and t tail agree with Boost") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = 0.1 + 20 * u(rng), b = 0.1 + 20 * u(rng), x = u(rng);
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
    const double t = 8 * u(rng) - 4, df = 1 + static_cast<double>(rng() % 60);
    const double expected = 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
    CHECK(std::abs(student_t_two_tailed(t, df) - expected) < 1e-10);
  }
  CHECK(student_t_two_tailed(0.0, 5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(student_t_two_tailed(1.0, 0.0), EvaluationError);
}

TEST_CASE("extrinsic evaluation counts revisions per essay") {
  const auto suite = synth::generate_suite(synth::tiny(2));
  const auto& c = suite.corpus("E");
  std::map<std::string, double> d_count, u_count;
  for (const auto& e : c.essays) d_count[e.essay_id] = u_count[e.essay_id] = 0;
  for (const auto& r : c.revisions) (r.label == Label::Desirable ? d_count : u_count)[r.essay_id] += 1;
  std::vector<double> d, u, imp;
  for (const auto& e : c.essays) {
    d.push_back(d_count[e.essay_id]);
    u.push_back(u_count[e.essay_id]);
    imp.push_back(e.improvement);
  }
  const auto gold = extrinsic_gold(c);
  REQUIRE(gold.desirable);
  REQUIRE(gold.undesirable);
  CHECK(gold.desirable->r == doctest::Approx(oracle_r(d, imp)).epsilon(1e-10));
  CHECK(gold.undesirable->r == doctest::Approx(oracle_r(u, imp)).epsilon(1e-10));
  CHECK(gold.desirable->n == c.essays.size());

  const auto same = extrinsic_eval(gold_labels(c), c);
  CHECK(same.desirable->r == gold.desirable->r);

  auto all_u = gold_labels(c);
  for (auto& [id, l] : all_u) l = Label::Undesirable;
  const auto none = extrinsic_eval(all_u, c);
  CHECK_FALSE(none.desirable);
  CHECK(none.undesirable);

  auto missing = gold_labels(c);
  missing.erase(missing.begin());
  CHECK_THROWS_AS(extrinsic_eval(missing, c), EvaluationError);
}

TEST_CASE("a planted identity correlation is recovered exactly") {
  auto suite = synth::generate_suite(synth::tiny(3));
  auto c = suite.corpus("E");
  c.meta.improvement_range = {0, 100};
  std::map<std::string, double> d_count;
  for (const auto& r : c.revisions) d_count[r.essay_id] += r.label == Label::Desirable ? 1 : 0;
  for (auto& e : c.essays) e.improvement = d_count[e.essay_id];
  CHECK(extrinsic_gold(c).desirable->r == doctest::Approx(1.0));
}

TEST_CASE("cross-validation scores a memorizer at 1 and a constant model below 0.5") {
  const auto suite = synth::generate_suite(synth::tiny(4));
  const auto& c = suite.corpus("H1");
  std::vector<CvTask> tasks{{"H1", &c, corpus::make_folds(c, 4, 1)}};
  CvOptions opts;
  testing::WarningCapture quiet;
  const auto perfect = cross_validate(tasks, table_trainer(gold_labels(c)), opts);
  CHECK(perfect.scores_for("H1").mean_f1 == doctest::Approx(1.0));
  CHECK(perfect.scores_for("H1").fold_f1.size() == 4);
  CHECK(perfect.predicted.at("H1") == gold_labels(c));

  auto constant = gold_labels(c);
  for (auto& [id, l] : constant) l = Label::Undesirable;
  CHECK(cross_validate(tasks, table_trainer(constant), opts).scores_for("H1").mean_f1 < 0.5);
  CHECK_THROWS_AS(perfect.scores_for("E"), EvaluationError);
}

TEST_CASE("training splits are the complement of the test fold and get augmented") {
  const auto suite = synth::generate_suite(synth::tiny(5));
  const auto lexicon = synth::make_lexicon(synth::tiny(5));
  std::vector<CvTask> tasks;
  for (const auto& c : suite.corpora) tasks.push_back({c.meta.corpus_id, &c, corpus::make_folds(c, 3, 2)});
  CvOptions opts;
  opts.lexicon = &lexicon;
  opts.threads = 3;
  opts.eval_tasks = {"C"};
  opts.targets = [](std::string_view, std::size_t d, std::size_t u) {
    return augment::scaled_targets(d, u, 60);
  };
  std::mutex m;
  std::set<int> folds_seen;
  FoldTrainer trainer = [&](std::span<const TrainingSet> train, int fold) -> Predictor {
    CHECK(train.size() == 4);
    for (const auto& set : train) {
      const auto& task = *std::find_if(tasks.begin(), tasks.end(), [&](const CvTask& t) { return t.task == set.task; });
      CHECK(set.revisions.size() == 60);
      for (const auto& r : set.revisions) CHECK(task.folds.fold(r.essay_id) != fold);
      CHECK(set.revisions.size() >= training_split(task, fold).size());
    }
    std::lock_guard lock(m);
    folds_seen.insert(fold);
    return [](std::string_view, std::span<const corpus::Revision> revs) { return std::vector<double>(revs.size(), 0.7); };
  };
  testing::WarningCapture quiet;
  const auto res = cross_validate(tasks, trainer, opts);
  CHECK(folds_seen == std::set<int>{0, 1, 2});
  CHECK(res.scores.size() == 1);
  CHECK(res.predicted.at("C").size() == suite.corpus("C").revisions.size());

  for (int f = 0; f < 3; ++f) {
    const auto train = training_split(tasks[0], f);
    const auto test = test_split(tasks[0], f);
    CHECK(train.size() + test.size() == tasks[0].corpus->revisions.size());
  }
}

TEST_CASE("cross-validation results do not depend on the thread count") {
  const auto cfg = synth::tiny(6);
  const auto suite = synth::generate_suite(cfg);
  const auto& c = suite.corpus("E");
  std::vector<CvTask> tasks{{"E", &c, corpus::make_folds(c, 4, 3)}};
  // A deterministic but data-dependent predictor: probability from the training-set size and text length.
  FoldTrainer trainer = [](std::span<const TrainingSet> train, int) -> Predictor {
    const double n = static_cast<double>(train[0].revisions.size());
    return [n](std::string_view, std::span<const corpus::Revision> revs) {
      std::vector<double> p;
      for (const auto& r : revs) p.push_back(std::fmod(n + static_cast<double>(r.text_b.size()), 10.0) / 10.0);
      return p;
    };
  };
  testing::WarningCapture quiet;
  CvOptions one, many;
  many.threads = 4;
  const auto a = cross_validate(tasks, trainer, one);
  const auto b = cross_validate(tasks, trainer, many);
  CHECK(a.scores[0].fold_f1 == b.scores[0].fold_f1);
  CHECK(a.predicted == b.predicted);
}
