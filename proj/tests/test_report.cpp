#include <doctest.h>

#include <filesystem>

#include "revlab/error.hpp"
#include "revlab/report.hpp"
#include "revlab/text.hpp"
#include "support.hpp"

using namespace revlab;
using namespace revlab::eval;
using corpus::Label;

namespace {

IntrinsicRow f1_row(std::string regime, std::string source, std::string corpus, std::vector<double> folds) {
  double sum = 0.0;
  for (double f : folds) sum += f;
  const double mean = sum / static_cast<double>(folds.size());
  return {std::move(regime), std::move(source), std::move(corpus), std::move(folds), mean};
}

CorrelationRow corr(std::string regime, std::string source, std::string population, std::string label_source, Label cls,
                    std::optional<CorrelationResult> r) {
  return {std::move(regime), std::move(source), std::move(population), std::move(label_source), cls, r};
}

EvalReport sample() {
  EvalReport rep;
  rep.seed = 3;
  rep.config_hash = "00ff00ff00ff00ff";
  rep.intrinsic = {f1_row("stl", "", "C", {0.5, 0.7}), f1_row("mtl", "", "C", {0.6, 0.9}),
                   f1_row("stl", "", "E", {0.4, 0.4}), f1_row("tl", "E", "C", {0.8, 0.8}),
                   f1_row("tl", "C", "E", {0.3, 0.1})};
  rep.correlations = {
      corr("gold", "", "C", "gold", Label::Desirable, CorrelationResult{0.4, 0.049, 60}),
      corr("gold", "", "C", "gold", Label::Undesirable, CorrelationResult{-0.1, 0.051, 60}),
      corr("stl", "", "C", "predicted", Label::Desirable, std::nullopt),
      corr("tl", "E", "C", "predicted", Label::Desirable, CorrelationResult{1.0 / 3.0, 0.2, 60}),
  };
  rep.notes = {"Folds are essay-level."};
  return rep;
}

}  // namespace

TEST_CASE("CSV has a fixed header, fold rows and a mean row") {
  const auto csv = render_csv(sample());
  const auto lines = split(csv, '\n');
  CHECK(lines[0] == "seed,config_hash,record,regime,source,corpus,fold,f1,population,label_source,class,r,p,n,significant");
  CHECK(lines[1] == "3,00ff00ff00ff00ff,f1,stl,,C,0,0.5,,,,,,,");
  CHECK(lines[3] == "3,00ff00ff00ff00ff,f1,stl,,C,mean,0.59999999999999998,,,,,,,");
  CHECK(csv.find("correlation,gold,,,,,C,gold,Desirable,0.40000000000000002,0.049000000000000002,60,yes") !=
        std::string::npos);
  CHECK(csv.find("Undesirable,-0.10000000000000001,0.050999999999999997,60,no") != std::string::npos);
  CHECK(csv.find("predicted,Desirable,n/a,n/a,,no") != std::string::npos);
}

TEST_CASE("CSV round-trips exactly") {
  const auto rep = sample();
  const auto csv = render_csv(rep);
  const auto back = parse_csv(csv);
  CHECK(back.seed == rep.seed);
  CHECK(back.config_hash == rep.config_hash);
  REQUIRE(back.intrinsic.size() == rep.intrinsic.size());
  CHECK(back.intrinsic[4].fold_f1 == rep.intrinsic[4].fold_f1);
  CHECK(back.intrinsic[4].source == "C");
  REQUIRE(back.correlations.size() == rep.correlations.size());
  CHECK_FALSE(back.correlations[2].result);
  CHECK(back.correlations[3].result->r == 1.0 / 3.0);
  CHECK(render_csv(back) == csv);

  CHECK_THROWS_AS(parse_csv("nonsense\n"), EvaluationError);
  CHECK_THROWS_AS(parse_csv(split(csv, '\n')[0] + "\n1,2,3\n"), EvaluationError);
}

TEST_CASE("text report marks significance and transfer gains") {
  const auto text = render_text(sample());
  CHECK(text.find("0.400*") != std::string::npos);
  CHECK(text.find("-0.100*") == std::string::npos);
  CHECK(text.find("-0.100") != std::string::npos);
  CHECK(text.find("n/a") != std::string::npos);
  // E -> C beats STL on C (0.8 vs 0.6); C -> E does not beat STL on E (0.2 vs 0.4).
  CHECK(text.find("0.800^") != std::string::npos);
  CHECK(text.find("0.200^") == std::string::npos);
  CHECK(text.find("0.200") != std::string::npos);
  CHECK(text.find("Folds are essay-level.") != std::string::npos);
  CHECK(text.find("0.333") != std::string::npos);
}

TEST_CASE("rendering is byte-deterministic") {
  CHECK(render_csv(sample()) == render_csv(sample()));
  CHECK(render_text(sample()) == render_text(sample()));
}

TEST_CASE("delimiters in fields are rejected") {
  auto rep = sample();
  rep.intrinsic[0].corpus = "C,D";
  CHECK_THROWS_AS(render_csv(rep), EvaluationError);
}

TEST_CASE("emit_report writes both files") {
  testing::TempDir dir("report");
  emit_report(sample(), dir / "nested");
  CHECK(testing::read_file(dir / "nested" / "report.csv") == render_csv(sample()));
  CHECK(testing::read_file(dir / "nested" / "report.txt") == render_text(sample()));

  testing::write_file(dir / "blocker", "x");
  CHECK_THROWS_AS(emit_report(sample(), dir / "blocker" / "sub"), EvaluationError);
}
