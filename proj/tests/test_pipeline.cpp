#include "doctest.h"

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "jobmatch/config.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/manifest.hpp"
#include "jobmatch/pipeline.hpp"
#include "jobmatch/ranking.hpp"

using namespace jobmatch;
namespace fs = std::filesystem;

namespace {

// Scratch copy of the bundled fixture, so outputs never land in the source tree.
fs::path fixture(const std::string& name) {
  auto dir = testing::scratch(name);
  fs::copy(fs::path(JOBMATCH_SOURCE_DIR) / "data" / "synthetic", dir, fs::copy_options::recursive);
  fs::remove_all(dir / "out");
  return dir;
}

PipelineConfig config(const fs::path& dir, const std::string& name, const KeyValues& overrides = {}) {
  auto cfg = load_config(dir / (name + ".cfg"));
  return overrides.empty() ? cfg : with_overrides(cfg, overrides);
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(JOBMATCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(io::read_file(p)); }

}  // namespace

TEST_CASE("Task A contrastive pipeline end to end") {
  const auto dir = fixture("pipeline_a");
  const auto cfg = config(dir, "task_a_contrastive");
  std::ostringstream log;
  cmd_run(cfg, log);

  const auto out = cfg.output;
  for (const char* stage : {"ingest", "pairs", "train", "embed", "rank", "eval", "analyze"}) {
    const auto m = read_manifest(out / stage / "manifest.json");
    REQUIRE(m);
    CHECK(m->stage == stage);
    CHECK(m->seed == 13);
    CHECK(!m->inputs.empty());
    CHECK(m->config_snapshot == cfg.snapshot());
  }
  const auto report = json_file(out / "reports" / "report.json");
  CHECK(report["map_overall"].get<double>() >= 0.9);
  CHECK(report["by_language_pair"].size() == 5);
  CHECK(report["coverage"]["en"]["unmapped_pct"].get<double>() == 85.0);
  CHECK(fs::exists(out / "reports" / "analysis.txt"));
  CHECK(io::read_file(out / "reports" / "analysis.txt").find("—") != std::string::npos);
  const auto model = json_file(out / "model" / "config.json");
  CHECK(model["trained"].get<bool>());

  // Every manifest output hash matches the file on disk.
  for (const char* stage : {"rank", "eval"}) {
    const auto m = read_manifest(out / stage / "manifest.json");
    std::vector<fs::path> files;
    for (const auto& [p, _] : m->outputs) files.push_back(p);
    CHECK(changed_files(m->outputs, files).empty());
  }

  SUBCASE("rerun is byte-identical") {
    const auto run_en = io::read_file(out / "runs" / "en.run");
    const auto run_es = io::read_file(out / "runs" / "en-es.run");
    const auto rep = io::read_file(out / "reports" / "report.json");
    std::ostringstream again;
    cmd_run(cfg, again);
    CHECK(io::read_file(out / "runs" / "en.run") == run_en);
    CHECK(io::read_file(out / "runs" / "en-es.run") == run_es);
    CHECK(io::read_file(out / "reports" / "report.json") == rep);
    CHECK(again.str().find("warning: stale") == std::string::npos);
  }
  SUBCASE("changed corpus input warns about stale artifacts") {
    auto q = io::read_file(dir / "queries_en.tsv");
    io::write_file(dir / "queries_en.tsv", q + "en_qextra\tcider maker\n");
    std::ostringstream elog;
    cmd_eval(cfg, elog);
    CHECK(elog.str().find("warning: stale artifact") != std::string::npos);
    CHECK(elog.str().find("cmd_ingest") != std::string::npos);
  }
  SUBCASE("edited run files are refused") {
    auto run = read_run(out / "runs" / "en.run");
    run.tag = run.tag;
    std::swap(run.lists[0], run.lists[1]);
    write_run(out / "runs" / "en.run", run);
    std::ostringstream elog;
    CHECK_THROWS_WITH_AS(cmd_eval(cfg, elog), doctest::Contains("mixed runs"), ValidationError);
  }
}

TEST_CASE("Task A prompt and classify pipelines") {
  const auto dir = fixture("pipeline_a_other");
  std::ostringstream log;
  const auto prompt = config(dir, "task_a_prompt");
  cmd_run(prompt, log);
  CHECK_FALSE(json_file(prompt.output / "model" / "config.json")["trained"].get<bool>());
  const double prompt_map = json_file(prompt.output / "reports" / "report.json")["map_overall"].get<double>();

  const auto classify = config(dir, "task_a_classify", {{"classifier.epochs", "5"}});
  cmd_run(classify, log);
  CHECK(fs::exists(classify.output / "pairs" / "labeled_pairs.tsv"));
  CHECK(fs::exists(classify.output / "model" / "head.f32"));
  const double classify_map = json_file(classify.output / "reports" / "report.json")["map_overall"].get<double>();
  CHECK(classify_map > prompt_map);
  CHECK(read_run(classify.output / "runs" / "en.run").tag == "classify-taskA");
}

TEST_CASE("Task B pipelines") {
  const auto dir = fixture("pipeline_b");
  std::ostringstream log;
  for (const char* name : {"task_b_contrastive", "task_b_classify"}) {
    const auto cfg = config(dir, name, {{"contrastive.epochs", "10"}, {"classifier.epochs", "5"}});
    cmd_run(cfg, log);
    CHECK(json_file(cfg.output / "reports" / "report.json")["map_overall"].get<double>() > 0.5);
  }
}

TEST_CASE("stages refuse to run before their producers") {
  const auto dir = fixture("pipeline_order");
  const auto cfg = config(dir, "task_a_contrastive", {{"contrastive.epochs", "1"}});
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(cmd_train(cfg, log), doctest::Contains("produce with cmd_pairs"), MissingArtifact);
  cmd_ingest(cfg, log);
  cmd_pairs(cfg, log);
  CHECK_THROWS_WITH_AS(cmd_embed(cfg, log), doctest::Contains("produce with cmd_train"), MissingArtifact);
  cmd_train(cfg, log);
  CHECK_THROWS_WITH_AS(cmd_rank(cfg, log), doctest::Contains("produce with cmd_embed"), MissingArtifact);
  cmd_embed(cfg, log);
  CHECK_THROWS_WITH_AS(cmd_eval(cfg, log), doctest::Contains("run file missing; produce with cmd_rank"),
                       MissingArtifact);
  cmd_rank(cfg, log);
  cmd_eval(cfg, log);
  CHECK(fs::exists(cfg.output / "reports" / "report.json"));
}

TEST_CASE("checkpoints round-trip") {
  const auto dir = testing::scratch("pipeline_ckpt");
  auto scorer = PairScorerParams::init(ToyEncoderParams::init(64, 4, 3, 0.5), 9, 0.1);
  save_pair_scorer(scorer, dir);
  const auto back = load_pair_scorer(dir);
  CHECK(back.encoder.hash_dim == 64);
  CHECK(back.encoder.embed_dim == 4);
  REQUIRE(back.head_weights.size() == scorer.head_weights.size());
  // float32 storage
  for (std::size_t i = 0; i < scorer.head_weights.size(); ++i) {
    CHECK(back.head_weights[i] == static_cast<double>(static_cast<float>(scorer.head_weights[i])));
  }
  for (std::size_t i = 0; i < scorer.encoder.projection.size(); ++i) {
    CHECK(back.encoder.projection[i] == static_cast<double>(static_cast<float>(scorer.encoder.projection[i])));
  }
  CHECK_THROWS_AS(load_encoder(dir / "absent"), ValidationError);
}

TEST_CASE("gridsearch over the negative ratio") {
  const auto dir = fixture("pipeline_grid");
  const auto cfg = config(dir, "task_a_grid_ratio");
  std::ostringstream log;
  const auto result = cmd_gridsearch(cfg, 2, log);
  REQUIRE(result.leaderboard.size() == 3);
  REQUIRE(result.best);
  const auto& best = result.leaderboard[*result.best];
  CHECK(best.ok);
  // A unique argmax.
  CHECK(best.dev_map > result.leaderboard[1].dev_map);
  for (const char* ratio : {"sampler.neg_ratio=1 ->", "sampler.neg_ratio=2 ->", "sampler.neg_ratio=5 ->"}) {
    CHECK(log.str().find(ratio) != std::string::npos);
  }
  for (std::size_t i = 1; i < result.leaderboard.size(); ++i) {
    CHECK(result.leaderboard[i - 1].dev_map >= result.leaderboard[i].dev_map);
  }
  const auto tsv = io::read_file(cfg.output / "reports" / "leaderboard.tsv");
  CHECK(tsv.rfind("rank\tcell\tdev_map\tparameters\tstatus\tconfig\n", 0) == 0);

  // Ordering does not depend on the number of workers.
  const auto serial = with_overrides(cfg, {{"paths.output", (dir / "out" / "serial").string()}});
  std::ostringstream slog;
  cmd_gridsearch(serial, 1, slog);
  CHECK(io::read_file(serial.output / "reports" / "leaderboard.tsv") == tsv);
}

TEST_CASE("gridsearch records failed cells and continues") {
  const auto dir = fixture("pipeline_grid_fail");
  const auto cfg = config(dir, "task_a_contrastive",
                          {{"contrastive.epochs", "2"}, {"languages", "en"}, {"grid.contrastive.k_negatives", "5,40"}});
  std::ostringstream log;
  const auto result = cmd_gridsearch(cfg, 2, log);
  REQUIRE(result.leaderboard.size() == 2);
  CHECK(result.leaderboard[0].ok);
  CHECK(result.leaderboard[0].cell.label == "contrastive.k_negatives=5");
  CHECK_FALSE(result.leaderboard[1].ok);
  CHECK(result.leaderboard[1].error.find("k_negatives") != std::string::npos);
  CHECK(result.best == std::optional<std::size_t>(0));
  CHECK(io::read_file(cfg.output / "reports" / "leaderboard.tsv").find("failed") != std::string::npos);

  const auto single = with_overrides(cfg, {{"grid.contrastive.k_negatives", "3"}});
  const auto one = cmd_gridsearch(single, 4, log);
  REQUIRE(one.leaderboard.size() == 1);
  CHECK(one.best == std::optional<std::size_t>(0));
  CHECK(one.leaderboard[0].cell.label == "contrastive.k_negatives=3");
}

TEST_CASE("command-line exit codes") {
  const auto dir = fixture("pipeline_cli");
  const auto log = dir / "cli.log";
  const auto cfg = (dir / "task_a_prompt.cfg").string();
  CHECK(run_cli("eval -c " + cfg, log) == 2);
  CHECK(io::read_file(log).find("run file missing; produce with cmd_rank") != std::string::npos);
  CHECK(run_cli("run -c " + cfg + " --seed 5", log) == 0);
  CHECK(read_manifest(dir / "out" / "task_a_prompt" / "rank" / "manifest.json")->seed == 5);
  CHECK(run_cli("run -c " + (dir / "nope.cfg").string(), log) == 2);
  CHECK(run_cli("run", log) == 2);
  CHECK(run_cli("frobnicate", log) == 2);
  CHECK(run_cli("rank -c " + cfg + " --method magic", log) == 2);

  io::write_file(dir / "bad.cfg", io::read_file(dir / "task_a_prompt.cfg") + "colour = blue\n");
  CHECK(run_cli("run -c " + (dir / "bad.cfg").string(), log) == 2);
  CHECK(io::read_file(log).find("unknown key 'colour'") != std::string::npos);

  // Malformed artifacts are validation errors; a diverging run is a run-time failure.
  io::write_file(dir / "out" / "task_a_prompt" / "model" / "encoder.f32", "xx");
  CHECK(run_cli("embed -c " + cfg, log) == 2);
  auto text = io::read_file(dir / "task_a_contrastive.cfg");
  text.replace(text.find("learning_rate = 300"), 19, "learning_rate = 1e308");
  io::write_file(dir / "boom.cfg", text);
  const auto boom = (dir / "boom.cfg").string();
  CHECK(run_cli("pairs -c " + boom, log) == 0);
  CHECK(run_cli("train -c " + boom, log) == 3);
}
