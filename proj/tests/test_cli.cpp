#include <doctest.h>

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "revlab/corpus.hpp"
#include "revlab/report.hpp"
#include "support.hpp"

using namespace revlab;

namespace {

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string& args, const testing::TempDir& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string("REVLAB_THREADS=2 '") + REVLAB_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return {WEXITSTATUS(status), testing::read_file(log)};
}

std::string q(const testing::fs::path& p) { return "'" + p.string() + "'"; }

// Tiny suite on disk plus a revisions file per corpus.
void seed_suite(const testing::TempDir& dir) {
  REQUIRE(cli("synth --preset tiny --seed 3 --out " + q(dir / "suite"), dir).code == 0);
  for (const std::string id : {"E", "H1", "H2", "C"}) {
    const auto c = corpus::load_corpus(dir / "suite" / (id + ".jsonl"));
    corpus::save_revisions(c.revisions, dir / (id + ".revs.jsonl"));
  }
}

}  // namespace

TEST_CASE("help and argument errors") {
  testing::TempDir dir("cli-args");
  CHECK(cli("--help", dir).code == 0);
  CHECK(cli("", dir).code == 2);
  CHECK(cli("frobnicate", dir).code == 2);
  CHECK(cli("synth", dir).code == 2);
  CHECK(cli("train --regime svm --embeddings x --out y", dir).code == 2);
}

TEST_CASE("synth writes a loadable suite") {
  testing::TempDir dir("cli-synth");
  const auto r = cli("synth --preset tiny --seed 3 --out " + q(dir / "s"), dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("E: ") != std::string::npos);
  for (const std::string f : {"E.jsonl", "C.annotations.tsv", "lexicon.tsv", "embeddings.txt", "suite.json"})
    CHECK(testing::fs::exists(dir / "s" / f));
  CHECK(cli("synth --preset huge --out " + q(dir / "h"), dir).code == 2);
  CHECK(cli("synth --config " + q(dir / "missing.json") + " --out " + q(dir / "h"), dir).code == 2);
}

TEST_CASE("align rebuilds alignments and revisions") {
  testing::TempDir dir("cli-align");
  seed_suite(dir);
  const auto r = cli("align --corpus " + q(dir / "suite" / "C.jsonl") + " --annotations " +
                         q(dir / "suite" / "C.annotations.tsv") + " --out " + q(dir / "C.aligned.jsonl"),
                     dir);
  CHECK(r.code == 0);
  const auto back = corpus::load_corpus(dir / "C.aligned.jsonl");
  CHECK(back.revisions.size() == corpus::load_corpus(dir / "suite" / "C.jsonl").revisions.size());
  CHECK(cli("align --corpus " + q(dir / "suite" / "C.jsonl") + " --threshold 1.5 --out " + q(dir / "x.jsonl"), dir)
            .code == 2);
}

TEST_CASE("augment grows to the requested targets") {
  testing::TempDir dir("cli-augment");
  seed_suite(dir);
  const auto lex = q(dir / "suite" / "lexicon.tsv");
  auto r = cli("augment --in " + q(dir / "C.revs.jsonl") + " --lexicon " + lex + " --targets D=40,U=40 --out " +
                   q(dir / "aug.jsonl"),
               dir);
  CHECK(r.code == 0);
  const auto revs = corpus::load_revisions(dir / "aug.jsonl");
  CHECK(revs.size() == 80);
  CHECK(cli("augment --in " + q(dir / "C.revs.jsonl") + " --lexicon " + lex + " --targets D=1,U=1 --out " +
                q(dir / "small.jsonl"),
            dir)
            .code == 2);
  CHECK(cli("augment --in " + q(dir / "C.revs.jsonl") + " --lexicon " + lex + " --reference C:svm --out " +
                q(dir / "x.jsonl"),
            dir)
            .code == 2);
}

TEST_CASE("train, evaluate and report round trip") {
  testing::TempDir dir("cli-train");
  seed_suite(dir);
  const auto emb = q(dir / "suite" / "embeddings.txt");
  testing::write_file(dir / "train.json", R"({"hidden_dim": 4, "max_len": 12, "epochs": 1})");
  const auto cfg = " --config " + q(dir / "train.json");

  CHECK(cli("train --regime stl --data C=" + q(dir / "C.revs.jsonl") + cfg + " --embeddings " + emb + " --out " +
                q(dir / "stl.json"),
            dir)
            .code == 0);
  CHECK(cli("train --regime union --data C=" + q(dir / "C.revs.jsonl") + " --data E=" + q(dir / "E.revs.jsonl") +
                cfg + " --embeddings " + emb + " --out " + q(dir / "union.json"),
            dir)
            .code == 0);
  CHECK(cli("train --regime tl --source E=" + q(dir / "E.revs.jsonl") + " --target C=" + q(dir / "C.revs.jsonl") +
                cfg + " --embeddings " + emb + " --out " + q(dir / "tl.json"),
            dir)
            .code == 0);
  CHECK(cli("train --regime tl --source E=" + q(dir / "E.revs.jsonl") + cfg + " --embeddings " + emb + " --out " +
                q(dir / "x.json"),
            dir)
            .code == 2);

  auto r = cli("evaluate --checkpoint " + q(dir / "tl.json") + " --corpus C=" + q(dir / "suite" / "C.jsonl") +
                   " --embeddings " + emb + " --out " + q(dir / "eval"),
               dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("macro-F1") != std::string::npos);
  const auto rep = eval::parse_csv(testing::read_file(dir / "eval" / "report.csv"));
  REQUIRE(rep.intrinsic.size() == 1);
  CHECK(rep.intrinsic[0].regime == "tl");
  CHECK(rep.intrinsic[0].corpus == "C");

  CHECK(cli("evaluate --checkpoint " + q(dir / "stl.json") + " --corpus C=" + q(dir / "suite" / "C.jsonl") +
                " --embeddings " + emb + " --fold 1 --k 3 --out " + q(dir / "fold"),
            dir)
            .code == 0);
  CHECK(cli("evaluate --checkpoint " + q(dir / "stl.json") + " --corpus C=" + q(dir / "suite" / "C.jsonl") +
                " --embeddings " + emb + " --fold 5 --k 3 --out " + q(dir / "fold"),
            dir)
            .code == 2);

  r = cli("report --csv " + q(dir / "eval"), dir);
  CHECK(r.code == 0);
  CHECK(r.out == eval::render_text(rep));
  CHECK(cli("report --csv " + q(dir / "eval") + " --out " + q(dir / "r.txt"), dir).code == 0);
  CHECK(testing::read_file(dir / "r.txt") == r.out);
}

TEST_CASE("training failures exit 3") {
  testing::TempDir dir("cli-fail-train");
  seed_suite(dir);
  auto revs = corpus::load_revisions(dir / "C.revs.jsonl");
  for (auto& rv : revs) rv.label = corpus::Label::Desirable;
  corpus::save_revisions(revs, dir / "one.jsonl");
  const auto r = cli("train --regime stl --data C=" + q(dir / "one.jsonl") + " --epochs 1 --embeddings " +
                         q(dir / "suite" / "embeddings.txt") + " --out " + q(dir / "x.json"),
                     dir);
  CHECK(r.code == 3);
  CHECK(r.out.find("training failed") != std::string::npos);

  CHECK(cli("train --regime mtl --data C=" + q(dir / "C.revs.jsonl") + " --data E=" + q(dir / "E.revs.jsonl") +
                " --epochs 1 --embeddings " + q(dir / "suite" / "embeddings.txt") + " --out " + q(dir / "x.json"),
            dir)
            .code == 3);
}

TEST_CASE("evaluation failures exit 4") {
  testing::TempDir dir("cli-fail-eval");
  testing::write_file(dir / "report.csv", "nonsense\n");
  const auto r = cli("report --csv " + q(dir.path()), dir);
  CHECK(r.code == 4);
  CHECK(r.out.find("evaluation failed") != std::string::npos);
}

TEST_CASE("run writes per-seed reports and is reproducible") {
  testing::TempDir dir("cli-run");
  const std::string common =
      " --preset tiny --regime stl,mtl --seeds 1 --folds 3 --epochs 1 --hidden 4 --max-len 12 --augment scaled "
      "--mtl-total 32 --tl-total 32";
  CHECK(cli("run" + common + " --out " + q(dir / "a"), dir).code == 0);
  CHECK(cli("run" + common + " --threads 1 --out " + q(dir / "b"), dir).code == 0);
  const auto a = testing::read_file(dir / "a" / "seed-1" / "report.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == testing::read_file(dir / "b" / "seed-1" / "report.csv"));
  CHECK(testing::fs::exists(dir / "a" / "manifest.json"));
  CHECK(cli("run --preset tiny --regime svm --out " + q(dir / "c"), dir).code == 2);
  CHECK(cli("run --preset tiny --augment huge --out " + q(dir / "c"), dir).code == 2);
  CHECK(cli("run --preset tiny --folds 1 --out " + q(dir / "c"), dir).code == 2);
}
