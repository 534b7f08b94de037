#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>

#include "robustgcn/synth.hpp"
#include "support/test_support.hpp"

using namespace robustgcn;
using namespace robustgcn::testsup;

#ifndef ROBUSTGCN_CLI_PATH
#error "ROBUSTGCN_CLI_PATH must be defined by the build"
#endif

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args, const std::filesystem::path& capture) {
  const std::string cmd =
      std::string(ROBUSTGCN_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WEXITSTATUS(rc);
  r.output = read_file(capture);
  return r;
}

std::filesystem::path make_bundle(const std::filesystem::path& dir) {
  SynthSpec spec;
  spec.nodes = 120;
  spec.classes = 3;
  spec.intra_degree = 2.5;
  spec.inter_degree = 0.4;
  spec.seed = 21;
  SynthBundle sb = make_synth_bundle(spec);
  write_bundle(sb.bundle, dir);
  return dir;
}

}  // namespace

TEST_CASE("cli help lists subcommands and flags") {
  ScopedTempDir dir("cli_help");
  auto r = run_cli("--help", dir.path / "out.txt");
  CHECK(r.exit_code == 0);
  for (const char* needle : {"train", "attack", "breakdown", "evaluate"})
    CHECK(r.output.find(needle) != std::string::npos);
  auto rt = run_cli("train --help", dir.path / "t.txt");
  for (const char* needle : {"--agg", "--alpha", "--lr", "--seed", "--no-feature-norm"})
    CHECK(rt.output.find(needle) != std::string::npos);
  CHECK(rt.output.find("0.01") != std::string::npos);  // defaults shown in help
}

TEST_CASE("cli train is deterministic and echoes config") {
  ScopedTempDir dir("cli_train");
  make_bundle(dir.path / "bundle");
  const std::string base = "train --data " + (dir.path / "bundle").string() +
                           " --agg median --seed 1 --epochs 40 --patience 40";
  auto r1 = run_cli(base + " --out " + (dir.path / "m1.json").string(),
                    dir.path / "o1.txt");
  auto r2 = run_cli(base + " --out " + (dir.path / "m2.json").string(),
                    dir.path / "o2.txt");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(dir.path / "m1.json") == read_file(dir.path / "m2.json"));
  CHECK(read_file(dir.path / "m1.history.json") ==
        read_file(dir.path / "m2.history.json"));
  const std::string model_text = read_file(dir.path / "m1.json");
  CHECK(model_text.find("\"aggregation\": \"median\"") != std::string::npos);
  const std::string hist = read_file(dir.path / "m1.history.json");
  CHECK(hist.find("--agg median") != std::string::npos);
}

TEST_CASE("cli tmean defaults alpha to 0.45 and rejects bad alpha") {
  ScopedTempDir dir("cli_alpha");
  make_bundle(dir.path / "bundle");
  auto ok = run_cli("train --data " + (dir.path / "bundle").string() +
                        " --agg tmean --epochs 5 --patience 5 --out " +
                        (dir.path / "m.json").string(),
                    dir.path / "ok.txt");
  REQUIRE(ok.exit_code == 0);
  const std::string model_text = read_file(dir.path / "m.json");
  CHECK(model_text.find("\"alpha\": 0.45") != std::string::npos);

  auto bad = run_cli("train --data " + (dir.path / "bundle").string() +
                         " --agg tmean --alpha 0.6 --out " +
                         (dir.path / "m2.json").string(),
                     dir.path / "bad.txt");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("cli exit codes: missing data dir is 3, bad flags are 2") {
  ScopedTempDir dir("cli_exit");
  auto missing = run_cli("train --data " + (dir.path / "nope").string(),
                         dir.path / "m.txt");
  CHECK(missing.exit_code == 3);
  auto badflag = run_cli("train --frobnicate", dir.path / "b.txt");
  CHECK(badflag.exit_code == 2);
  auto badagg = run_cli("breakdown --agg nonsense --n 5", dir.path / "a.txt");
  CHECK(badagg.exit_code == 2);
}

TEST_CASE("cli honors splits.json, remapped into the LCC") {
  ScopedTempDir dir("cli_splits");
  // bundle with distractor components so some split ids fall outside the LCC
  SynthSpec spec;
  spec.nodes = 120;
  spec.classes = 3;
  spec.intra_degree = 2.5;
  spec.inter_degree = 0.4;
  spec.extra_component_nodes = 9;
  spec.seed = 33;
  SynthBundle sb = make_synth_bundle(spec);
  write_bundle(sb.bundle, dir.path / "bundle");
  std::string train_ids, val_ids, test_ids;
  for (NodeId i = 0; i < 129; ++i) {
    std::string& bucket = (i % 10 == 0) ? train_ids : (i % 10 == 1) ? val_ids : test_ids;
    if (!bucket.empty()) bucket += ",";
    bucket += std::to_string(i);
  }
  write_file(dir.path / "bundle" / "splits.json",
             "{\"train\":[" + train_ids + "],\"val\":[" + val_ids + "],\"test\":[" +
                 test_ids + "]}");
  auto r = run_cli("train --data " + (dir.path / "bundle").string() +
                       " --epochs 20 --patience 20 --out " +
                       (dir.path / "m.json").string(),
                   dir.path / "t.txt");
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(dir.path / "m.json"));
}

TEST_CASE("cli scratch env var supplies default output paths") {
  ScopedTempDir dir("cli_scratch");
  make_bundle(dir.path / "bundle");
  const std::string cmd = "ROBUSTGCN_SCRATCH=" + (dir.path / "scratch").string() + " " +
                          std::string(ROBUSTGCN_CLI_PATH) + " train --data " +
                          (dir.path / "bundle").string() +
                          " --epochs 5 --patience 5 > " +
                          (dir.path / "out.txt").string() + " 2>&1";
  std::filesystem::create_directories(dir.path / "scratch");
  const int rc = WEXITSTATUS(std::system(cmd.c_str()));
  REQUIRE(rc == 0);
  CHECK(std::filesystem::exists(dir.path / "scratch" / "model.json"));
}

TEST_CASE("cli train exits 4 when training diverges") {
  ScopedTempDir dir("cli_diverge");
  make_bundle(dir.path / "bundle");
  auto r = run_cli("train --data " + (dir.path / "bundle").string() +
                       " --lr 1e200 --epochs 10 --patience 10 --out " +
                       (dir.path / "m.json").string(),
                   dir.path / "d.txt");
  CHECK(r.exit_code == 4);
}

TEST_CASE("cli breakdown table prints the closed-form values") {
  ScopedTempDir dir("cli_bd");
  auto med = run_cli("breakdown --agg median --n 5", dir.path / "m.txt");
  CHECK(med.exit_code == 0);
  CHECK(med.output.find("0.500000") != std::string::npos);
  auto mean = run_cli("breakdown --agg mean --n 4", dir.path / "w.txt");
  CHECK(mean.output.find("0.200000") != std::string::npos);
  auto tm = run_cli("breakdown --agg tmean --alpha 0.2 --n 10", dir.path / "t.txt");
  CHECK(tm.output.find("0.300000") != std::string::npos);
}

TEST_CASE("cli attack produces reports; repeated runs are byte-identical") {
  ScopedTempDir dir("cli_attack");
  make_bundle(dir.path / "bundle");
  auto tr = run_cli("train --data " + (dir.path / "bundle").string() +
                        " --agg mean --seed 2 --epochs 60 --patience 60 --out " +
                        (dir.path / "m.json").string(),
                    dir.path / "t.txt");
  REQUIRE(tr.exit_code == 0);

  const std::string base = "attack --model " + (dir.path / "m.json").string() +
                           " --data " + (dir.path / "bundle").string() +
                           " --mode direct --budget 1-5 --targets 12 --target-seed 7";
  for (int round = 1; round <= 2; ++round) {
    const std::string tag = std::to_string(round);
    auto r = run_cli(base + " --out " + (dir.path / ("r" + tag + ".json")).string() +
                         " --csv " + (dir.path / ("r" + tag + ".csv")).string() +
                         " --outcomes " + (dir.path / ("o" + tag + ".jsonl")).string(),
                     dir.path / ("a" + tag + ".txt"));
    REQUIRE(r.exit_code == 0);
  }
  CHECK(read_file(dir.path / "r1.json") == read_file(dir.path / "r2.json"));
  CHECK(read_file(dir.path / "r1.csv") == read_file(dir.path / "r2.csv"));
  CHECK(read_file(dir.path / "o1.jsonl") == read_file(dir.path / "o2.jsonl"));

  const std::string rep = read_file(dir.path / "r1.json");
  CHECK(rep.find("\"mode\": \"direct\"") != std::string::npos);
  CHECK(rep.find("\"p\": [") != std::string::npos);

  SUBCASE("--jobs does not change the output") {
    auto r = run_cli(base + " --jobs 3 --out " + (dir.path / "rj.json").string(),
                     dir.path / "aj.txt");
    REQUIRE(r.exit_code == 0);
    CHECK(read_file(dir.path / "rj.json") == read_file(dir.path / "r1.json"));
  }
  SUBCASE("single-edge mode emits a category summary") {
    auto se = run_cli("attack --model " + (dir.path / "m.json").string() + " --data " +
                          (dir.path / "bundle").string() +
                          " --mode single-edge --targets 20 --out " +
                          (dir.path / "cat.json").string() + " --csv " +
                          (dir.path / "cat.csv").string(),
                      dir.path / "se.txt");
    REQUIRE(se.exit_code == 0);
    const std::string cat = read_file(dir.path / "cat.json");
    CHECK(cat.find("pct_injection") != std::string::npos);
    const std::string csv = read_file(dir.path / "cat.csv");
    CHECK(csv.rfind("node,degree,purity,injection,deletion\n", 0) == 0);
  }
}

TEST_CASE("cli evaluate tabulates and repairs corrupt metrics") {
  ScopedTempDir dir("cli_eval");
  make_bundle(dir.path / "bundle");
  auto tr = run_cli("train --data " + (dir.path / "bundle").string() +
                        " --agg median --seed 3 --epochs 40 --patience 40 --out " +
                        (dir.path / "m.json").string(),
                    dir.path / "t.txt");
  REQUIRE(tr.exit_code == 0);
  auto at = run_cli("attack --model " + (dir.path / "m.json").string() + " --data " +
                        (dir.path / "bundle").string() +
                        " --mode direct --budget 1-5 --targets 10 --out " +
                        (dir.path / "r1.json").string(),
                    dir.path / "a.txt");
  REQUIRE(at.exit_code == 0);

  SUBCASE("single report prints one row") {
    auto ev = run_cli("evaluate " + (dir.path / "r1.json").string(),
                      dir.path / "e.txt");
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("synth-21") != std::string::npos);
    CHECK(ev.output.find("median") != std::string::npos);
  }
  SUBCASE("rows sort by metric descending within a dataset") {
    write_file(dir.path / "hi.json", R"({
  "config": "", "dataset": "synth-21", "aggregation": "mean", "alpha": 0.450000,
  "mode": "direct", "targets": 10, "seeds": [9],
  "p": [1.000000, 1.000000, 1.000000, 1.000000, 1.000000], "metric": 15.000000
})");
    auto ev = run_cli("evaluate " + (dir.path / "r1.json").string() + " " +
                          (dir.path / "hi.json").string(),
                      dir.path / "e2.txt");
    CHECK(ev.exit_code == 0);
    const auto mean_pos = ev.output.find("mean");
    const auto median_pos = ev.output.find("median");
    REQUIRE(mean_pos != std::string::npos);
    REQUIRE(median_pos != std::string::npos);
    CHECK(mean_pos < median_pos);  // metric 15 outranks the real campaign
  }
  SUBCASE("a report missing required fields exits 3") {
    std::string r2 = read_file(dir.path / "r1.json");
    const auto pos = r2.find("\"metric\"");
    REQUIRE(pos != std::string::npos);
    r2.replace(pos, std::string("\"metric\"").size(), "\"metric_old\"");
    write_file(dir.path / "broken.json", r2);
    auto ev = run_cli("evaluate " + (dir.path / "broken.json").string(),
                      dir.path / "e2b.txt");
    CHECK(ev.exit_code == 3);
  }
  SUBCASE("corrupt metric triggers a warning and recomputation") {
    std::string text = read_file(dir.path / "r1.json");
    const auto pos = text.find("\"metric\": ");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"metric\": ").size() + 8, "\"metric\": 9.999999");
    write_file(dir.path / "corrupt.json", text);
    auto ev = run_cli("evaluate " + (dir.path / "corrupt.json").string(),
                      dir.path / "e3.txt");
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("warning") != std::string::npos);
    CHECK(ev.output.find("recomputed") != std::string::npos);
  }
  SUBCASE("unreadable report exits 3") {
    auto ev = run_cli("evaluate " + (dir.path / "missing.json").string(),
                      dir.path / "e4.txt");
    CHECK(ev.exit_code == 3);
  }
}
