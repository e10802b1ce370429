// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "pmd/cli/commands.hpp"
#include "pmd/cli/run_config.hpp"
#include "pmd/error.hpp"
#include "pmd/eval/report.hpp"

using namespace pmd;
using namespace pmd::cli;
namespace fs = std::filesystem;

namespace {

RunConfig toy_run_config(const testing::TempDir& dir) {
  testing::write_toy_graph({}, dir / "raw");
  auto c = RunConfig::parse(
      "model.layers = 2\nmodel.hidden = 16\nmodel.heads = 2\nmodel.ffn = 32\nmodel.max_len = 16\n"
      "train.epochs = 1\ntrain.lr = 1e-3\nschedule.grades = 2,1\nschedule.mask_rates = 0.2,0\n"
      "schedule.epochs = 1\nschedule.lr = 1e-3\nrun.record_timing = false\n");
  const auto raw = dir / "raw";
  c.set("data.train", (raw / "train.tsv").string());
  c.set("data.valid", (raw / "valid.tsv").string());
  c.set("data.test", (raw / "test.tsv").string());
  c.set("data.descriptions", (raw / "descriptions.tsv").string());
  c.set("data.prepared", (dir / "prepared").string());
  c.set("output.dir", (dir / "run").string());
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = RunConfig::parse("# comment\n\nseed = 7\n  model.hidden=64   # trailing\n");
  CHECK(c.seed() == 7);
  CHECK(c.get("model.hidden") == "64");
  CHECK(c.get("train.lr") == "3e-4");
  CHECK_THROWS_WITH_AS(RunConfig::parse("seed = 1\nmodel.colour = red\n", "x.cfg"), doctest::Contains("x.cfg:2"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse("seed 1\n", "y.cfg"), doctest::Contains("y.cfg:1"), ConfigError);
  CHECK_THROWS_AS(RunConfig().get("nope"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/pmd.cfg"), DataError);
}

TEST_CASE("overrides, environment and rendering") {
  RunConfig c;
  const std::vector<std::string> items{"seed=5", "train.batch_size = 8"};
  c.apply_overrides(items);
  CHECK(c.seed() == 5);
  CHECK(c.get_size("train.batch_size") == 8);
  CHECK_THROWS_AS(c.apply_overrides(std::vector<std::string>{"seed"}), ConfigError);
  CHECK_THROWS_AS(c.apply_overrides(std::vector<std::string>{"bogus=1"}), ConfigError);

  ::setenv("PMD_SEED", "99", 1);
  c.apply_environment();
  ::unsetenv("PMD_SEED");
  CHECK(c.seed() == 99);

  const auto text = c.render();
  CHECK(RunConfig::parse(text).render() == text);
  CHECK(text.find("seed = 99\n") != std::string::npos);
  CHECK(text.find("data.descriptions") < text.find("train.lr"));
}

TEST_CASE("typed views") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  const auto s = c.schedule();
  REQUIRE(s.stages.size() == 4);
  CHECK(s.stages[0].init == train::InitMode::Copy);
  CHECK(s.stages[2].mask_rate == 0.05);
  CHECK(s.stages[3].grade == 1);
  CHECK(c.encoder(100).vocab_size == 100);
  CHECK(c.sweep_rates().size() == 6);

  c.set("schedule.alpha", "0.1,0.2,0.3,0.4");
  CHECK(c.schedule().stages[3].weights.alpha == 0.4);
  c.set("schedule.alpha", "0.1,0.2");
  CHECK_THROWS_AS(c.schedule(), ConfigError);
  c.set("schedule.alpha", "0.1");
  c.set("schedule.grades", "3,2,1");
  c.set("schedule.mask_rates", "0.2,0.1,0");
  CHECK_THROWS_AS(c.schedule(), ConfigError);  // must start at model.layers
  c.set("model.layers", "3");
  CHECK_NOTHROW(c.validate());
  c.set("train.full_softmax", "maybe");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.set("train.full_softmax", "false");
  c.set("model.heads", "5");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("prepare writes augmented artifacts") {
  testing::TempDir dir;
  testing::write_file(dir / "train.tsv", "a\tr\tb\nb\tr\tc\nc\tq\ta\n");
  testing::write_file(dir / "valid.tsv", "a\tq\tc\n");
  testing::write_file(dir / "test.tsv", "b\tq\ta\n");
  RunConfig c;
  c.set("data.train", (dir / "train.tsv").string());
  c.set("data.valid", (dir / "valid.tsv").string());
  c.set("data.test", (dir / "test.tsv").string());
  c.set("data.descriptions", "");
  c.set("data.prepared", (dir / "prep").string());
  std::ostringstream out;
  const auto stats = cmd_prepare(c, false, out);
  CHECK(stats["train"] == 3);
  CHECK(stats["augmented"]["train"] == 6);
  CHECK(stats["augmented"]["relations"] == 4);
  CHECK(stats["entities"] == 3);
  CHECK(fs::exists(dir / "prep" / "stats.json"));
  CHECK(fs::exists(dir / "prep" / "vocab.txt"));
  CHECK_THROWS_AS(cmd_prepare(c, false, out), ConfigError);
  CHECK_NOTHROW(cmd_prepare(c, true, out));
  const auto ds = load_prepared(dir / "prep", 16);
  CHECK(ds.graph.augmented);
  CHECK(ds.graph.train.size() == 6);
}

TEST_CASE("run, eval, sweep and report on a toy graph") {
  testing::TempDir dir;
  auto c = toy_run_config(dir);
  std::ostringstream log;
  cmd_prepare(c, false, log);
  cmd_run(c, false, log);
  const auto run = dir / "run";
  for (const char* f : {"config.resolved", "vocab.txt", "train.log", "valid.log", "baseline.pmdc", "baseline.json",
                        "stage-2.pmdc", "stage-2.json", "stage-1.pmdc", "stage-1.json"})
    CHECK_MESSAGE(fs::exists(run / f), f);
  CHECK_THROWS_AS(cmd_run(c, false, log), ConfigError);

  const auto stage1 = eval::read_metrics_json(run / "stage-1.json");
  CHECK(stage1.stage == "grade");
  CHECK(stage1.grade == 1);
  CHECK_FALSE(stage1.wall_clock_seconds.has_value());
  const auto pre = eval::read_metrics_json(run / "stage-2.json");
  CHECK(pre.stage == "pre-distill");
  CHECK(pre.mask_rate == 0.2);
  CHECK(stage1.parameter_count < pre.parameter_count);

  const auto again = cmd_eval(c, run / "stage-1.pmdc", kg::Split::Test, run / "queries.csv");
  CHECK(again.metrics == stage1.metrics);
  CHECK(fs::exists(run / "queries.csv"));

  // the resolved config reproduces the run byte for byte
  auto replay = RunConfig::load(run / "config.resolved");
  replay.set("output.dir", (dir / "replay").string());
  cmd_run(replay, false, log);
  for (const char* f : {"baseline.json", "stage-2.json", "stage-1.json", "train.log"})
    CHECK(testing::read_file(run / f) == testing::read_file(dir / "replay" / f));

  c.set("output.dir", (dir / "sweep").string());
  const std::vector<double> rates{0.0, 0.5};
  const auto csv = cmd_sweep_mask(c, rates, run / "baseline.pmdc", log);
  CHECK(csv.rfind("rate,MR,MRR,hits1,hits3,hits10\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(fs::exists(dir / "sweep" / "sweep-0.5.json"));
  CHECK_THROWS_AS(cmd_sweep_mask(c, std::vector<double>{1.5}, run / "baseline.pmdc", log), ConfigError);

  const std::vector<fs::path> dirs{run};
  const auto md = cmd_report(dirs, ReportFormat::Markdown);
  CHECK(md.find("| run | report |") == 0);
  CHECK(md.find("baseline") < md.find("stage-2"));
  CHECK(md.find("stage-2") < md.find("stage-1"));
  const auto table = cmd_report(dirs, ReportFormat::Csv);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
  CHECK_THROWS_AS(cmd_report(std::vector<fs::path>{dir / "missing"}, ReportFormat::Csv), DataError);
}
