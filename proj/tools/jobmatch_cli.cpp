// jobmatch: command-line driver for the retrieval pipeline.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "jobmatch/config.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/pipeline.hpp"
#include "jobmatch/synthetic.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> task;
  std::optional<std::string> languages;
  std::optional<std::size_t> top_k;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "pipeline configuration file")->required();
  cmd->add_option("--seed", o.seed, "override the global seed");
  cmd->add_option("--method", o.method, "override the method (classify, contrastive, prompt)");
  cmd->add_option("--task", o.task, "override the task (A or B)");
  cmd->add_option("--lang", o.languages, "override the language list, e.g. en,es,en-es");
  cmd->add_option("--top-k", o.top_k, "truncate rankings after k candidates");
}

jobmatch::PipelineConfig resolve(const Overrides& o) {
  auto cfg = jobmatch::load_config(o.config);
  jobmatch::KeyValues kv;
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  if (o.method) kv["method"] = *o.method;
  if (o.task) kv["task"] = *o.task;
  if (o.languages) kv["languages"] = *o.languages;
  if (o.top_k) kv["rank.top_k"] = std::to_string(*o.top_k);
  return kv.empty() ? cfg : jobmatch::with_overrides(cfg, kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Job title and skill retrieval pipeline"};
  app.require_subcommand(1);
  Overrides o;
  std::size_t jobs = 1;

  using Stage = void (*)(const jobmatch::PipelineConfig&, std::ostream&);
  const std::pair<const char*, Stage> stages[] = {
      {"ingest", jobmatch::cmd_ingest}, {"pairs", jobmatch::cmd_pairs}, {"train", jobmatch::cmd_train},
      {"embed", jobmatch::cmd_embed},   {"rank", jobmatch::cmd_rank},   {"eval", jobmatch::cmd_eval},
      {"analyze", jobmatch::cmd_analyze}, {"run", jobmatch::cmd_run},
  };
  const std::map<std::string, std::string> help = {
      {"ingest", "validate the corpus files and summarize them"},
      {"pairs", "build training pairs for the configured method"},
      {"train", "train the toy encoder or pair classifier"},
      {"embed", "embed queries and knowledge bases"},
      {"rank", "write one TREC run file per language slot"},
      {"eval", "compute MAP reports from the run files"},
      {"analyze", "major-group and coverage analysis"},
      {"run", "all stages from ingest to analyze"},
  };
  std::map<CLI::App*, Stage> dispatch;
  for (const auto& [name, fn] : stages) {
    auto* cmd = app.add_subcommand(name, help.at(name));
    add_common(cmd, o);
    dispatch[cmd] = fn;
  }
  auto* grid = app.add_subcommand("gridsearch", "train and evaluate every grid.* cell");
  add_common(grid, o);
  grid->add_option("-j,--jobs", jobs, "cells to run concurrently")->check(CLI::PositiveNumber);

  jobmatch::SyntheticSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write the synthetic fixture corpus and configs");
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--clusters", spec.clusters, "number of occupation clusters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      jobmatch::write_synthetic(jobmatch::generate_synthetic(spec), spec, synth_out);
      std::cout << "synthetic corpus written to " << synth_out << "\n";
      return 0;
    }
    const auto cfg = resolve(o);
    if (grid->parsed()) {
      const auto result = jobmatch::cmd_gridsearch(cfg, jobs, std::cerr);
      if (result.best) {
        const auto& best = result.leaderboard[*result.best];
        std::cout << fmt::format("best: {} (dev MAP {:.3f})\n", best.cell.label, best.dev_map);
        return 0;
      }
      std::cerr << "error: every grid cell failed\n";
      return 3;
    }
    for (const auto& [cmd, fn] : dispatch) {
      if (cmd->parsed()) fn(cfg, std::cerr);
    }
    return 0;
  } catch (const jobmatch::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
