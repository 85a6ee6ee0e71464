// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "jobmatch/config.hpp"
#include "jobmatch/contrastive.hpp"
#include "jobmatch/evaluation.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/pairs.hpp"
#include "jobmatch/pipeline.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/synthetic.hpp"
#include "jobmatch/text.hpp"

using namespace jobmatch;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, not_applicable };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("jobmatch_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path fixture_copy(const std::string& name) {
  auto dir = scratch(name);
  fs::copy(fs::path(JOBMATCH_SOURCE_DIR) / "data" / "synthetic", dir, fs::copy_options::recursive);
  fs::remove_all(dir / "out");
  return dir;
}

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(io::read_file(p)); }

PipelineConfig run_pipeline(const fs::path& dir, const std::string& name, const KeyValues& overrides = {}) {
  auto cfg = load_config(dir / (name + ".cfg"));
  if (!overrides.empty()) cfg = with_overrides(cfg, overrides);
  std::ostringstream log;
  cmd_run(cfg, log);
  return cfg;
}

RankedList ordered(const std::string& qid, const std::vector<std::string>& docs) {
  std::vector<double> scores(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) scores[i] = static_cast<double>(docs.size() - i);
  return make_ranked_list(qid, docs, scores);
}

double brute_force_ap(const RankedList& l, const std::set<std::string>& gold) {
  double sum = 0.0;
  for (std::size_t r = 0; r < l.entries.size(); ++r) {
    if (!gold.count(l.entries[r].doc_id)) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i <= r; ++i) hits += gold.count(l.entries[i].doc_id);
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(gold.size());
}

Outcome metric_oracle() {
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::string> docs;
    for (std::size_t i = 0; i < n; ++i) docs.push_back("d" + std::to_string(i));
    rng.shuffle(docs);
    std::set<std::string> gold;
    const std::size_t g = 1 + rng.below(10);
    for (std::size_t i = 0; i < g; ++i) gold.insert("d" + std::to_string(rng.below(n + 5)));
    const auto l = ordered("q", docs);
    mismatches += average_precision(l, gold) != brute_force_ap(l, gold);
  }
  const double worked = average_precision(ordered("q", {"d1", "d2", "d3"}), {"d1", "d3"});
  const bool ok = mismatches == 0 && std::abs(worked - 0.833333) < 1e-6 && std::abs(worked - 5.0 / 6.0) < 1e-9;
  return check(ok, fmt::format("{} mismatches in 1000 instances; worked example {:.9f}", mismatches, worked));
}

EmbeddingMatrix matrix(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix m;
  m.dim = rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.ids.push_back(std::to_string(i));
    m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
  }
  return m;
}

Outcome infonce_correctness() {
  ContrastiveConfig full;
  full.k_negatives = 31;
  const auto same = matrix({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  const auto groups = BatchGroups::distinct(4);
  const double uniform = infonce_loss(same, same, full, &groups).value;
  const auto ortho = matrix({{1, 0}, {0, 1}});
  const double two = infonce_loss(ortho, ortho, full).value;

  Rng rng(8);
  double rescale_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(8), d = 4;
    std::vector<std::vector<double>> a(n, std::vector<double>(d)), b = a;
    for (auto* m : {&a, &b}) {
      for (auto& r : *m) {
        for (auto& x : r) x = rng.normal();
      }
    }
    auto u = matrix(a), v = matrix(b);
    ContrastiveConfig cfg;
    cfg.k_negatives = 1 + rng.below(n);
    cfg.seed = rng.next();
    const double base = infonce_loss(u, v, cfg, nullptr, t).value;
    for (std::size_t i = 0; i < n; ++i) {
      const double su = 0.1 + 10 * rng.uniform(), sv = 0.1 + 10 * rng.uniform();
      for (auto& x : u.row(i)) x *= su;
      for (auto& x : v.row(i)) x *= sv;
    }
    rescale_err = std::max(rescale_err, std::abs(infonce_loss(u, v, cfg, nullptr, t).value - base));
  }

  static const char* words[] = {"cider", "maker", "baker", "chef", "nurse", "driver", "clerk", "welder"};
  double max_rel = 0.0;
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(seed);
    std::vector<ContrastivePair> batch;
    auto w = [&] { return std::string(words[r.below(8)]); };
    for (std::size_t i = 0; i < 4; ++i) {
      batch.push_back({w() + " " + w() + std::to_string(i), w() + " " + w() + " " + w(), PairType::title_alt_title});
    }
    auto params = ToyEncoderParams::init(48, 8, seed);
    ContrastiveConfig cfg;
    cfg.batch_size = 4;
    cfg.k_negatives = 1 + seed % 3;
    cfg.symmetric = seed % 2 == 0;
    cfg.seed = seed;
    const auto g = infonce_grad(batch, params, cfg, seed);
    for (std::size_t k = 0; k < params.projection.size(); ++k) {
      auto plus = params, minus = params;
      plus.projection[k] += h;
      minus.projection[k] -= h;
      const double fd =
          (infonce_loss(batch, plus, cfg, seed).value - infonce_loss(batch, minus, cfg, seed).value) / (2 * h);
      const double scale = std::max(std::abs(fd), std::abs(g.projection[k]));
      if (scale < 1e-7) continue;
      max_rel = std::max(max_rel, std::abs(fd - g.projection[k]) / scale);
    }
  }
  const bool ok = std::abs(uniform - std::log(4.0)) < 1e-9 && std::abs(two - 0.31326) < 1e-5 &&
                  rescale_err < 1e-9 && max_rel < 1e-4;
  return check(ok, fmt::format("(a) {:.12f} vs ln 4; (b) {:.6f}; (c) max drift {:.2e}; (d) max rel err {:.2e}",
                               uniform, two, rescale_err, max_rel));
}

Outcome negative_sampling() {
  std::size_t leaks = 0, ratio_errors = 0, byte_mismatches = 0;
  auto make_pairs = [](std::uint64_t seed) {
    Rng rng(seed);
    RawPairSet set{"en", {}};
    for (std::size_t q = 0; q < 30; ++q) {
      const std::size_t positives = 1 + rng.below(4);
      for (std::size_t i = 0; i < positives; ++i) {
        std::string t = fmt::format("title {}", rng.below(500));
        if (rng.below(3) == 0) t[0] = 'T';
        set.pairs.push_back({fmt::format("query {}", q), t});
      }
    }
    return set;
  };
  const auto dir = scratch("sampling");
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto set = make_pairs(seed);
    std::map<std::string, std::set<std::string>> gold;
    for (const auto& p : set.pairs) gold[p.query].insert(text::fold_key(p.related));
    for (const auto& cfg : {SamplerConfig::ratio_1_1(seed), SamplerConfig::ratio_1_2(seed), SamplerConfig::ratio_1_5(seed)}) {
      const auto out = make_classification_set(set, cfg);
      std::map<std::string, std::size_t> pos, neg;
      for (const auto& p : out.pairs) {
        (p.label ? pos : neg)[p.query]++;
        if (p.label == 0 && gold.at(p.query).count(text::fold_key(p.document))) ++leaks;
      }
      for (const auto& [q, n] : pos) {
        ratio_errors += neg[q] != static_cast<std::size_t>(cfg.neg_ratio) * n;
      }
    }
    if (seed < 10) {
      const auto a = make_classification_set(set, SamplerConfig::ratio_1_2(seed));
      const auto b = make_classification_set(set, SamplerConfig::ratio_1_2(seed));
      write_labeled_pairs(dir / "a.tsv", a.pairs);
      write_labeled_pairs(dir / "b.tsv", b.pairs);
      byte_mismatches += io::read_file(dir / "a.tsv") != io::read_file(dir / "b.tsv");
    }
  }
  return check(leaks == 0 && ratio_errors == 0 && byte_mismatches == 0,
               fmt::format("{} gold leaks, {} ratio errors, {} byte mismatches", leaks, ratio_errors,
                           byte_mismatches));
}

Outcome contrastive_signal() {
  const auto dir = fixture_copy("contrastive");
  const auto trained = run_pipeline(dir, "task_a_contrastive");
  const auto init = run_pipeline(dir, "task_a_contrastive",
                                 {{"contrastive.epochs", "0"}, {"paths.output", "out/untrained"}});
  const double after = json_file(trained.output / "reports" / "report.json")["map_overall"].get<double>();
  const double before = json_file(init.output / "reports" / "report.json")["map_overall"].get<double>();
  return check(after - before >= 0.2 && after >= 0.9,
               fmt::format("MAP {:.3f} trained vs {:.3f} at initialization", after, before));
}

Outcome classification_signal() {
  const auto dir = fixture_copy("classify");
  // The bundled fixture is the default generator output; rebuild it in memory for held-out pairs.
  const SyntheticSpec spec;
  const auto corpus = generate_synthetic(spec);
  const auto regen = scratch("classify_regen");
  write_synthetic(corpus, spec, regen);
  for (const char* f : {"kb_en.tsv", "queries_en.tsv", "qrels_en.txt", "pairs.tsv"}) {
    if (io::read_file(regen / f) != io::read_file(dir / f)) {
      return check(false, std::string("bundled fixture differs from the generator output: ") + f);
    }
  }
  const auto cfg = run_pipeline(dir, "task_a_classify");
  const auto scorer = load_pair_scorer(cfg.output / "model");
  const auto heldout = synthetic_heldout_pairs(corpus, 77);
  const double accuracy = pair_accuracy(heldout, scorer);

  // Random-ranking MAP on the same slot, averaged over shuffles.
  const auto& kb = corpus.kb.at("en");
  const auto& qrels = corpus.qrels.at("en");
  double random_map = 0.0;
  const int shuffles = 20;
  for (int s = 0; s < shuffles; ++s) {
    Rng rng(1000 + s);
    RunFile run{"random", {}};
    for (const auto& q : corpus.queries.at("en")) {
      std::vector<std::string> ids;
      for (const auto& e : kb.entries) ids.push_back(e.doc_id);
      rng.shuffle(ids);
      run.lists.push_back(ordered(q.qid, ids));
    }
    random_map += evaluate_run(run, qrels).map / shuffles;
  }
  const double model_map = json_file(cfg.output / "reports" / "report.json")["by_language"]["en"].get<double>();
  return check(accuracy >= 0.95 && model_map - random_map >= 0.2,
               fmt::format("held-out accuracy {:.3f} on {} pairs; en MAP {:.3f} vs random {:.3f}", accuracy,
                           heldout.size(), model_map, random_map));
}

Outcome analysis_fidelity() {
  const auto a = coverage_from_counts(2619, 591), b = coverage_from_counts(4661, 569),
             c = coverage_from_counts(4729, 585);
  const bool coverage_ok = a.unmapped_pct == 77.4 && b.unmapped_pct == 87.8 && c.unmapped_pct == 87.6;

  MajorGroupScores scores;
  for (int g : {0, 1, 2, 3, 4, 5, 7, 8, 9}) scores[std::to_string(g)] = {0.5, 1};
  scores["unmapped"] = {0.25, 3};
  const auto table = render_major_group_table({{"en", scores}});
  std::vector<std::string> lines;
  std::istringstream in(table);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  bool layout_ok = lines.size() == 12 && lines[1].rfind("Unmapped Titles", 0) == 0;
  for (int g = 0; g <= 9 && layout_ok; ++g) {
    const auto& line = lines[static_cast<std::size_t>(g) + 2];
    layout_ok = line.rfind(std::to_string(g) + " ", 0) == 0;
    const bool dash = line.find("—") != std::string::npos;
    layout_ok = layout_ok && dash == (g == 6);
  }
  return check(coverage_ok && layout_ok,
               fmt::format("unmapped {:.1f}% / {:.1f}% / {:.1f}%; group 6 row: '{}'", a.unmapped_pct,
                           b.unmapped_pct, c.unmapped_pct, lines.size() > 8 ? lines[8] : ""));
}

// Public shared-task baseline files, when present: <dir>/baseline.run and <dir>/qrels.txt.
Outcome baseline_reproduction() {
  const char* env = std::getenv("JOBMATCH_BASELINE_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(JOBMATCH_SOURCE_DIR) / "data" / "baseline";
  if (!fs::exists(dir / "baseline.run") || !fs::exists(dir / "qrels.txt")) {
    return {Verdict::not_applicable,
            "baseline run/qrels not supplied (" + dir.string() + "); desk-scale MAPs are covered by 1-6"};
  }
  const double map = evaluate_run(read_run(dir / "baseline.run"), load_qrels(dir / "qrels.txt")).map;
  return check(format_score(map) == "0.499", fmt::format("baseline en MAP {:.4f}, expected 0.499", map));
}

Outcome determinism() {
  std::vector<std::string> runs;
  std::vector<std::string> reports;
  for (const char* name : {"determinism_1", "determinism_2"}) {
    const auto dir = fixture_copy(name);
    const auto cfg = run_pipeline(dir, "task_a_contrastive");
    std::string r;
    for (const auto& slot : cfg.languages) r += io::read_file(cfg.output / "runs" / (slot.name + ".run"));
    runs.push_back(r);
    std::string rep;
    for (const char* f : {"report.json", "tables.txt", "map.csv", "analysis.json", "analysis.txt"}) {
      rep += io::read_file(cfg.output / "reports" / f);
    }
    reports.push_back(rep);
  }
  return check(runs[0] == runs[1] && reports[0] == reports[1],
               fmt::format("run files {}, reports {}", runs[0] == runs[1] ? "identical" : "differ",
                           reports[0] == reports[1] ? "identical" : "differ"));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle", 10, metric_oracle},
      {2, "InfoNCE correctness", 30, infonce_correctness},
      {3, "negative sampling", 0, negative_sampling},
      {4, "contrastive learning signal", 300, contrastive_signal},
      {5, "classification signal", 0, classification_signal},
      {6, "analysis fidelity", 0, analysis_fidelity},
      {7, "baseline MAP reproduction", 0, baseline_reproduction},
      {8, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs >= c.limit_seconds && out.verdict == Verdict::pass) {
      out = {Verdict::fail, out.detail + fmt::format("; too slow ({:.1f}s >= {:.0f}s)", secs, c.limit_seconds)};
    }
    const char* label = out.verdict == Verdict::pass ? "PASS" : out.verdict == Verdict::fail ? "FAIL" : "N/A ";
    std::cout << fmt::format("[{}] {}. {}: {} ({:.2f}s)\n", label, c.id, c.name, out.detail, secs);
    failures += out.verdict == Verdict::fail;
  }
  std::cout << (failures ? fmt::format("{} criteria failed\n", failures) : std::string("all criteria met\n"));
  return failures ? 1 : 0;
}
