#include "jobmatch/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "jobmatch/corpus.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/evaluation.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/manifest.hpp"
#include "jobmatch/ranking.hpp"

namespace jobmatch {

namespace fs = std::filesystem;

namespace {

// Collects inputs, outputs and warnings of one stage and writes its manifest.
class Stage {
 public:
  Stage(const PipelineConfig& cfg, std::string name, std::ostream& log)
      : cfg_(cfg), name_(std::move(name)), log_(log), start_(std::chrono::steady_clock::now()) {
    log_ << name_ << ": start\n";
  }

  fs::path dir(const std::string& sub) const { return cfg_.output / sub; }

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void warn(const std::string& msg) {
    log_ << "warning: " << msg << "\n";
    warnings_.push_back(msg);
  }
  void info(const std::string& msg) { log_ << name_ << ": " << msg << "\n"; }

  // Fails with a message naming the producing command.
  void require(const fs::path& p, const std::string& what, const std::string& producer) {
    if (!fs::exists(p)) {
      throw MissingArtifact(what + " missing; produce with cmd_" + producer + " (expected " + p.string() + ")");
    }
    input(p);
  }

  // Warns about inputs that changed since the upstream stage recorded them.
  void check_upstream(const std::string& upstream, const std::vector<fs::path>& files, bool as_outputs = true) {
    auto m = read_manifest(cfg_.output / upstream / "manifest.json");
    if (!m) return;
    for (const auto& f : changed_files(as_outputs ? m->outputs : m->inputs, files)) {
      warn("stale artifact: " + f + " changed since cmd_" + upstream + " recorded it; rerun cmd_" + upstream);
    }
  }

  void finish() {
    Manifest m;
    m.stage = name_;
    m.inputs = hash_files(inputs_);
    m.outputs = hash_files(outputs_);
    m.config_snapshot = cfg_.snapshot();
    m.seed = cfg_.seed;
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m.warnings = warnings_;
    write_manifest(cfg_.output / name_ / "manifest.json", m);
    log_ << name_ << ": done (" << outputs_.size() << " artifacts)\n";
  }

 private:
  const PipelineConfig& cfg_;
  std::string name_;
  std::ostream& log_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> inputs_, outputs_;
  std::vector<std::string> warnings_;
};

std::vector<fs::path> corpus_files(const PipelineConfig& cfg) {
  std::vector<fs::path> files;
  if (!cfg.entities.empty()) files.push_back(cfg.entities);
  if (!cfg.pairs.empty()) files.push_back(cfg.pairs);
  if (cfg.links) files.push_back(*cfg.links);
  for (const auto& lang : cfg.plain_languages()) {
    if (cfg.kb.count(lang)) files.push_back(cfg.kb.at(lang));
    if (cfg.queries.count(lang)) files.push_back(cfg.queries.at(lang));
  }
  for (const auto& slot : cfg.languages) files.push_back(cfg.qrels_path(slot));
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

void require_corpus(Stage& stage, const PipelineConfig& cfg, const std::vector<fs::path>& files) {
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ValidationError("input file not found: " + f.string());
    stage.input(f);
  }
  (void)cfg;
  stage.check_upstream("ingest", files, false);
}

std::vector<std::string> source_languages(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : cfg.languages) {
    if (std::find(out.begin(), out.end(), s.source) == out.end()) out.push_back(s.source);
  }
  return out;
}

std::vector<std::string> target_languages(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : cfg.languages) {
    if (std::find(out.begin(), out.end(), s.target) == out.end()) out.push_back(s.target);
  }
  return out;
}

std::vector<RawPairSet> training_sets(const PipelineConfig& cfg, Stage& stage) {
  const auto langs = cfg.plain_languages();
  std::vector<RawPairSet> kept;
  for (auto& set : load_pairs(cfg.pairs)) {
    if (std::find(langs.begin(), langs.end(), set.language) == langs.end()) {
      stage.info("skipping training pairs for unconfigured language " + set.language);
      continue;
    }
    if (auto d = set.duplicate_count()) stage.warn(fmt::format("{} duplicate training rows in {}", d, set.language));
    kept.push_back(std::move(set));
  }
  if (kept.empty()) throw ValidationError("no training pairs for the configured languages in " + cfg.pairs.string());
  return kept;
}

std::optional<PromptTemplate> query_prompt(const PipelineConfig& cfg) {
  if (cfg.method == Method::prompt) return cfg.prompt();
  return std::nullopt;
}

std::size_t parameter_count(const PipelineConfig& cfg) {
  std::size_t n = cfg.encoder.hash_dim * cfg.encoder.embed_dim;
  if (cfg.method == Method::classify) n += 2 * 4 * cfg.encoder.embed_dim + 2;
  return n;
}

GoldStandard load_gold(const PipelineConfig& cfg, const LanguageSlot& slot) {
  GoldStandard g = load_qrels(cfg.qrels_path(slot));
  attach_query_text(g, load_queries(cfg.queries_path(slot)));
  return g;
}

fs::path run_path(const PipelineConfig& cfg, const LanguageSlot& slot) {
  return cfg.output / "runs" / (slot.name + ".run");
}

// Reorders an externally produced matrix to the given id order.
EmbeddingMatrix align_rows(const EmbeddingMatrix& m, const std::vector<std::string>& ids, const std::string& what) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    if (!index.emplace(m.ids[i], i).second) throw ValidationError(what + ": duplicate id '" + m.ids[i] + "'");
  }
  if (index.size() != ids.size()) {
    throw ValidationError(fmt::format("{}: {} rows, expected {}", what, index.size(), ids.size()));
  }
  EmbeddingMatrix out;
  out.ids = ids;
  out.dim = m.dim;
  out.normalized = m.normalized;
  out.values.resize(ids.size() * m.dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = index.find(ids[r]);
    if (it == index.end()) throw ValidationError(what + ": missing id '" + ids[r] + "'");
    auto src = m.row(it->second);
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(r * m.dim));
  }
  return out;
}

}  // namespace

void save_encoder(const ToyEncoderParams& p, const fs::path& dir) {
  p.validate();
  EmbeddingMatrix m;
  m.dim = p.embed_dim;
  m.values = p.projection;
  for (std::size_t r = 0; r < p.hash_dim; ++r) m.ids.push_back(std::to_string(r));
  export_embeddings(m, dir, "encoder");
  nlohmann::ordered_json j;
  j["hash_dim"] = p.hash_dim;
  j["embed_dim"] = p.embed_dim;
  j["seed"] = p.seed;
  io::write_file(dir / "encoder_params.json", j.dump(2) + "\n");
}

ToyEncoderParams load_encoder(const fs::path& dir) {
  const auto meta_path = dir / "encoder_params.json";
  if (!fs::exists(meta_path)) throw MissingArtifact("encoder missing; produce with cmd_train (" + meta_path.string() + ")");
  ToyEncoderParams p;
  try {
    auto j = nlohmann::json::parse(io::read_file(meta_path));
    p.hash_dim = j.at("hash_dim").get<std::size_t>();
    p.embed_dim = j.at("embed_dim").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  const auto m = import_embeddings(dir / "encoder.json");
  if (m.rows() != p.hash_dim || m.dim != p.embed_dim) {
    throw ValidationError(fmt::format("{}: projection is {}x{}, expected {}x{}", dir.string(), m.rows(), m.dim,
                                      p.hash_dim, p.embed_dim));
  }
  p.projection = m.values;
  p.validate();
  return p;
}

void save_pair_scorer(const PairScorerParams& p, const fs::path& dir) {
  save_encoder(p.encoder, dir);
  // One row per logit: 4d weights followed by the bias.
  const std::size_t w = p.head_weights.size() / 2;
  EmbeddingMatrix head;
  head.dim = w + 1;
  head.ids = {"unrelated", "related"};
  for (std::size_t r = 0; r < 2; ++r) {
    head.values.insert(head.values.end(), p.head_weights.begin() + static_cast<std::ptrdiff_t>(r * w),
                       p.head_weights.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    head.values.push_back(p.head_bias[r]);
  }
  export_embeddings(head, dir, "head");
}

PairScorerParams load_pair_scorer(const fs::path& dir) {
  PairScorerParams p;
  p.encoder = load_encoder(dir);
  if (!fs::exists(dir / "head.json")) throw MissingArtifact("classifier head missing; produce with cmd_train");
  const std::size_t w = 4 * p.encoder.embed_dim;
  const auto head = import_embeddings(dir / "head.json");
  if (head.rows() != 2 || head.dim != w + 1) throw ValidationError(dir.string() + ": head has the wrong shape");
  for (std::size_t r = 0; r < 2; ++r) {
    auto row = head.row(r);
    p.head_weights.insert(p.head_weights.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(w));
    p.head_bias[r] = row[w];
  }
  p.validate();
  return p;
}

void cmd_ingest(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "ingest", log);
  const auto files = corpus_files(cfg);
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ValidationError("input file not found: " + f.string());
    stage.input(f);
  }
  nlohmann::ordered_json summary;
  summary["task"] = to_string(cfg.task);
  if (!cfg.entities.empty()) {
    const auto entities = load_entities(cfg.entities);
    std::size_t occ = 0, coded = 0;
    for (const auto& e : entities) {
      occ += e.entity_type == EntityType::occupation;
      coded += e.esco_code.has_value();
    }
    summary["entities"] = {{"occupations", occ}, {"skills", entities.size() - occ}, {"with_esco_code", coded}};
  }
  if (!cfg.pairs.empty()) {
    nlohmann::ordered_json pj = nlohmann::ordered_json::object();
    for (const auto& set : load_pairs(cfg.pairs)) {
      pj[set.language] = {{"rows", set.pairs.size()}, {"duplicates", set.duplicate_count()}};
      if (set.duplicate_count()) {
        stage.warn(fmt::format("{} duplicate training rows in {}", set.duplicate_count(), set.language));
      }
    }
    summary["pairs"] = pj;
  }
  if (cfg.links) summary["links"] = load_links(*cfg.links).size();
  nlohmann::ordered_json kbj = nlohmann::ordered_json::object(), qj = nlohmann::ordered_json::object();
  std::map<std::string, KnowledgeBase> kbs;
  std::map<std::string, std::vector<Query>> queries;
  for (const auto& lang : target_languages(cfg)) {
    kbs[lang] = load_kb(cfg.kb.at(lang), lang);
    kbj[lang] = kbs[lang].size();
  }
  for (const auto& lang : source_languages(cfg)) {
    queries[lang] = load_queries(cfg.queries.at(lang));
    qj[lang] = queries[lang].size();
  }
  summary["kb"] = kbj;
  summary["queries"] = qj;
  nlohmann::ordered_json gj = nlohmann::ordered_json::object();
  for (const auto& slot : cfg.languages) {
    const GoldStandard g = load_qrels(cfg.qrels_path(slot));
    std::set<std::string> qids, docs;
    for (const auto& q : queries[slot.source]) qids.insert(q.qid);
    for (const auto& e : kbs[slot.target].entries) docs.insert(e.doc_id);
    std::size_t unknown_q = 0, unknown_d = 0;
    for (const auto& [qid, rel] : g.relevant) {
      unknown_q += !qids.count(qid);
      for (const auto& d : rel) unknown_d += !docs.count(d);
    }
    if (unknown_q) stage.warn(fmt::format("{}: {} judged queries not in the query file", slot.name, unknown_q));
    if (unknown_d) stage.warn(fmt::format("{}: {} judged documents not in the knowledge base", slot.name, unknown_d));
    gj[slot.name] = {{"judged_queries", g.relevant.size()}};
  }
  summary["qrels"] = gj;
  const auto out = stage.dir("ingest") / "summary.json";
  io::write_file(out, summary.dump(2) + "\n");
  stage.output(out);
  stage.finish();
}

void cmd_pairs(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "pairs", log);
  const auto dir = stage.dir("pairs");
  switch (cfg.method) {
    case Method::prompt:
      stage.info("the prompt method uses no training pairs");
      break;
    case Method::classify: {
      require_corpus(stage, cfg, {cfg.pairs});
      auto set = make_classification_set(training_sets(cfg, stage), cfg.sampler, cfg.per_language);
      if (set.stats.short_pool_warnings) {
        stage.warn(fmt::format("{} queries had fewer negative candidates than requested",
                               set.stats.short_pool_warnings));
      }
      write_labeled_pairs(dir / "labeled_pairs.tsv", set.pairs);
      io::write_file(dir / "pair_stats.json", stats_json(set.stats));
      stage.output(dir / "labeled_pairs.tsv");
      stage.output(dir / "pair_stats.json");
      stage.info(fmt::format("{} positives, {} negatives", set.stats.positives, set.stats.negatives));
      break;
    }
    case Method::contrastive: {
      if (cfg.encoder.backend == EncoderBackend::external && cfg.entities.empty()) {
        stage.info("external encoder without an entity file: no pairs to build");
        break;
      }
      require_corpus(stage, cfg, {cfg.entities});
      const auto entities = load_entities(cfg.entities);
      std::vector<JobSkillLink> links;
      std::size_t unresolved = 0;
      if (cfg.task == Task::B) {
        if (cfg.links) {
          require_corpus(stage, cfg, {*cfg.links});
          links = load_links(*cfg.links);
        } else {
          require_corpus(stage, cfg, {cfg.pairs});
          links = resolve_links(concat_pairsets(training_sets(cfg, stage)), entities, &unresolved);
          if (unresolved) stage.warn(fmt::format("{} training rows did not resolve to entities", unresolved));
        }
      }
      auto set = make_contrastive_set(entities, cfg.task, cfg.plain_languages(), links);
      if (set.pairs.empty()) throw ValidationError("no contrastive pairs could be built from " + cfg.entities.string());
      if (set.stats.unresolved_links) stage.warn(fmt::format("{} links name unknown entities", set.stats.unresolved_links));
      write_contrastive_pairs(dir / "contrastive_pairs.tsv", set.pairs);
      io::write_file(dir / "pair_stats.json", stats_json(set.stats));
      stage.output(dir / "contrastive_pairs.tsv");
      stage.output(dir / "pair_stats.json");
      stage.info(fmt::format("{} pairs", set.pairs.size()));
      break;
    }
  }
  stage.finish();
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "train", log);
  const auto dir = stage.dir("model");
  nlohmann::ordered_json meta;
  meta["method"] = to_string(cfg.method);
  meta["task"] = to_string(cfg.task);
  if (cfg.encoder.backend == EncoderBackend::external) {
    stage.info("external encoder: training happens outside this tool");
    stage.finish();
    return;
  }
  auto encoder = ToyEncoderParams::init(cfg.encoder.hash_dim, cfg.encoder.embed_dim, cfg.encoder.seed,
                                        cfg.encoder.init_scale);
  std::vector<TrainLogEntry> train_log;
  switch (cfg.method) {
    case Method::prompt:
      // Zero-shot: the encoder is used as initialized.
      meta["trained"] = false;
      save_encoder(encoder, dir);
      meta["parameters"] = encoder.parameter_count();
      break;
    case Method::contrastive: {
      const auto pairs_path = stage.dir("pairs") / "contrastive_pairs.tsv";
      stage.require(pairs_path, "contrastive pairs", "pairs");
      stage.check_upstream("pairs", {pairs_path});
      auto result = train_contrastive(load_contrastive_pairs(pairs_path), encoder, cfg.contrastive);
      save_encoder(result.params, dir);
      train_log = result.log;
      meta["trained"] = true;
      meta["parameters"] = result.params.parameter_count();
      meta["heldout_loss"] = result.heldout_loss;
      break;
    }
    case Method::classify: {
      const auto pairs_path = stage.dir("pairs") / "labeled_pairs.tsv";
      stage.require(pairs_path, "labeled pairs", "pairs");
      stage.check_upstream("pairs", {pairs_path});
      const auto data = load_labeled_pairs(pairs_path);
      auto init = PairScorerParams::init(encoder, cfg.classifier.seed, cfg.head_scale);
      auto result = train_classifier(data, init, cfg.classifier);
      save_pair_scorer(result.params, dir);
      for (const char* f : {"head.f32", "head.json", "head.ids.txt"}) stage.output(dir / f);
      train_log = result.log;
      meta["trained"] = true;
      meta["parameters"] = result.params.parameter_count();
      meta["train_accuracy"] = pair_accuracy(data, result.params);
      break;
    }
  }
  std::string jsonl;
  for (const auto& e : train_log) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["epoch"] = e.epoch;
    j["lr"] = e.lr;
    j["loss"] = e.loss;
    jsonl += j.dump() + "\n";
  }
  io::write_file(dir / "train_log.jsonl", jsonl);
  io::write_file(dir / "config.json", meta.dump(2) + "\n");
  for (const char* f : {"encoder.f32", "encoder.json", "encoder.ids.txt", "encoder_params.json", "train_log.jsonl",
                        "config.json"}) {
    stage.output(dir / f);
  }
  if (!train_log.empty()) stage.info(fmt::format("{} steps, final loss {:.6f}", train_log.size(), train_log.back().loss));
  stage.finish();
}

void cmd_embed(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "embed", log);
  if (cfg.method == Method::classify) {
    stage.info("the pair classifier scores pairs directly; nothing to embed");
    stage.finish();
    return;
  }
  const auto root = stage.dir("embeddings");
  auto emit = [&](const EmbeddingMatrix& m, const std::string& lang, const std::string& stem) {
    const auto meta = export_embeddings(m, root / lang, stem);
    stage.output(meta);
    stage.output(root / lang / (stem + ".f32"));
    stage.output(root / lang / (stem + ".ids.txt"));
  };
  std::optional<ToyEncoderParams> encoder;
  if (cfg.encoder.backend == EncoderBackend::toy) {
    stage.require(stage.dir("model") / "encoder_params.json", "encoder", "train");
    stage.input(stage.dir("model") / "encoder.f32");
    stage.check_upstream("train", {stage.dir("model") / "encoder_params.json", stage.dir("model") / "encoder.f32"});
    encoder = load_encoder(stage.dir("model"));
  }
  for (const auto& lang : source_languages(cfg)) {
    require_corpus(stage, cfg, {cfg.queries.at(lang)});
    const auto queries = load_queries(cfg.queries.at(lang));
    std::vector<std::string> ids, texts;
    for (const auto& q : queries) {
      ids.push_back(q.qid);
      texts.push_back(q.text);
    }
    if (encoder) {
      EncodeStats st;
      emit(encode(ids, texts, *encoder, query_prompt(cfg), true, &st), lang, "queries");
      if (st.empty_texts) stage.warn(fmt::format("{}: {} empty query texts", lang, st.empty_texts));
    } else {
      const auto meta = cfg.encoder.external_dir / lang / "queries.json";
      stage.require(meta, "external query embeddings", "embed (external producer)");
      emit(align_rows(import_embeddings(meta), ids, meta.string()), lang, "queries");
    }
  }
  for (const auto& lang : target_languages(cfg)) {
    require_corpus(stage, cfg, {cfg.kb.at(lang)});
    const auto kb = load_kb(cfg.kb.at(lang), lang);
    std::vector<std::string> ids, texts;
    for (const auto& e : kb.entries) {
      ids.push_back(e.doc_id);
      texts.push_back(e.text);
    }
    if (encoder) {
      emit(encode(ids, texts, *encoder, std::nullopt, true), lang, "kb");
    } else {
      const auto meta = cfg.encoder.external_dir / lang / "kb.json";
      stage.require(meta, "external knowledge-base embeddings", "embed (external producer)");
      emit(align_rows(import_embeddings(meta), ids, meta.string()), lang, "kb");
    }
  }
  stage.finish();
}

void cmd_rank(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "rank", log);
  RankOptions options{cfg.run_tag(), cfg.top_k};
  std::optional<PairScorerParams> scorer;
  if (cfg.method == Method::classify) {
    stage.require(stage.dir("model") / "head.f32", "classifier model", "train");
    stage.input(stage.dir("model") / "encoder.f32");
    stage.check_upstream("train", {stage.dir("model") / "head.f32", stage.dir("model") / "encoder.f32"});
    scorer = load_pair_scorer(stage.dir("model"));
  }
  for (const auto& slot : cfg.languages) {
    RunFile run;
    if (scorer) {
      require_corpus(stage, cfg, {cfg.queries_path(slot), cfg.kb_path(slot)});
      run = rank_by_classifier(load_queries(cfg.queries_path(slot)), load_kb(cfg.kb_path(slot), slot.target),
                               *scorer, options);
    } else {
      const auto q = stage.dir("embeddings") / slot.source / "queries.json";
      const auto d = stage.dir("embeddings") / slot.target / "kb.json";
      stage.require(q, "query embeddings for " + slot.source, "embed");
      stage.require(d, "knowledge-base embeddings for " + slot.target, "embed");
      const auto qm = import_embeddings(q), dm = import_embeddings(d);
      stage.check_upstream("embed", {q, d});
      if (qm.dim != dm.dim) {
        throw ValidationError(fmt::format("{}: query dim {} differs from knowledge-base dim {}", slot.name, qm.dim, dm.dim));
      }
      run = rank_by_embeddings(qm, dm, options);
    }
    const auto out = run_path(cfg, slot);
    write_run(out, run);
    stage.output(out);
  }
  stage.finish();
}

namespace {

EvalReport evaluate_slots(const PipelineConfig& cfg, Stage& stage) {
  const auto rank_manifest = read_manifest(cfg.output / "rank" / "manifest.json");
  std::map<LanguagePair, RunFile> runs;
  std::map<LanguagePair, GoldStandard> qrels;
  std::string tag;
  for (const auto& slot : cfg.languages) {
    const auto path = run_path(cfg, slot);
    if (!fs::exists(path)) throw MissingArtifact("run file missing; produce with cmd_rank (" + path.string() + ")");
    if (!rank_manifest) throw MissingArtifact("rank manifest missing; produce with cmd_rank");
    stage.input(path);
    if (!changed_files(rank_manifest->outputs, {path}).empty() || !rank_manifest->outputs.count(path.string())) {
      throw ValidationError("run file " + path.string() +
                            " does not match the rank manifest; refusing to evaluate mixed runs, rerun cmd_rank");
    }
    RunFile run = read_run(path);
    if (tag.empty()) tag = run.tag;
    if (run.tag != tag) throw ValidationError("run files carry different tags ('" + tag + "' and '" + run.tag + "')");
    require_corpus(stage, cfg, {cfg.qrels_path(slot), cfg.queries_path(slot)});
    const LanguagePair lp{slot.source, slot.target};
    runs[lp] = std::move(run);
    qrels[lp] = load_gold(cfg, slot);
  }
  EvalReport report = build_report(runs, qrels);
  if (!cfg.entities.empty()) {
    require_corpus(stage, cfg, {cfg.entities});
    const auto entities = load_entities(cfg.entities);
    const MajorGroupIndex index(entities);
    const LanguageSlot* pick = nullptr;
    for (const auto& slot : cfg.languages) {
      if (slot.cross()) continue;
      if (!pick || slot.source == cfg.select_lang) pick = &slot;
      if (slot.source == cfg.select_lang) break;
    }
    if (pick) {
      const LanguagePair lp{pick->source, pick->target};
      report.by_major_group = major_group_report(runs.at(lp), qrels.at(lp), index);
    }
    for (const auto& lang : target_languages(cfg)) {
      report.coverage[lang] = coverage_stats(load_kb(cfg.kb.at(lang), lang), index);
    }
  }
  for (const auto& w : report.warnings) stage.warn(w);
  return report;
}

}  // namespace

void cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "eval", log);
  const EvalReport report = evaluate_slots(cfg, stage);
  const auto dir = stage.dir("reports");
  io::write_file(dir / "report.json", report_json(report));
  io::write_file(dir / "tables.txt", report_tables(report, cfg.run_tag()));
  io::write_file(dir / "map.csv", report_csv(report));
  for (const char* f : {"report.json", "tables.txt", "map.csv"}) stage.output(dir / f);
  stage.info("MAP " + format_score(report.map_overall));
  stage.finish();
}

void cmd_analyze(const PipelineConfig& cfg, std::ostream& log) {
  Stage stage(cfg, "analyze", log);
  if (cfg.entities.empty()) throw ValidationError("analysis needs paths.entities for the ESCO major groups");
  require_corpus(stage, cfg, {cfg.entities});
  const auto entities = load_entities(cfg.entities);
  const MajorGroupIndex index(entities);

  std::vector<std::pair<std::string, CoverageStats>> coverage;
  for (const auto& lang : target_languages(cfg)) {
    require_corpus(stage, cfg, {cfg.kb.at(lang)});
    coverage.emplace_back(lang, coverage_stats(load_kb(cfg.kb.at(lang), lang), index));
  }
  std::vector<std::pair<std::string, MajorGroupScores>> groups;
  for (const auto& slot : cfg.languages) {
    if (slot.cross()) continue;
    const auto path = run_path(cfg, slot);
    if (!fs::exists(path)) throw MissingArtifact("run file missing; produce with cmd_rank (" + path.string() + ")");
    stage.input(path);
    stage.check_upstream("rank", {path});
    require_corpus(stage, cfg, {cfg.qrels_path(slot), cfg.queries_path(slot)});
    groups.emplace_back(slot.name, major_group_report(read_run(path), load_gold(cfg, slot), index));
  }

  nlohmann::ordered_json j;
  j["coverage"] = nlohmann::ordered_json::object();
  for (const auto& [lang, c] : coverage) {
    j["coverage"][lang] = {{"total", c.total}, {"mapped", c.mapped}, {"unmapped_pct", c.unmapped_pct}};
  }
  j["major_groups"] = nlohmann::ordered_json::object();
  for (const auto& [name, scores] : groups) {
    auto& col = j["major_groups"][name] = nlohmann::ordered_json::object();
    for (const auto& [g, s] : scores) col[g] = {{"map", round_half_up(s.map, 3)}, {"queries", s.queries}};
  }
  const auto dir = stage.dir("reports");
  io::write_file(dir / "analysis.json", j.dump(2) + "\n");
  io::write_file(dir / "analysis.txt", render_coverage_table(coverage) + "\n" + render_major_group_table(groups));
  stage.output(dir / "analysis.json");
  stage.output(dir / "analysis.txt");
  stage.finish();
}

void cmd_run(const PipelineConfig& cfg, std::ostream& log) {
  cmd_ingest(cfg, log);
  cmd_pairs(cfg, log);
  cmd_train(cfg, log);
  cmd_embed(cfg, log);
  cmd_rank(cfg, log);
  cmd_eval(cfg, log);
  if (!cfg.entities.empty()) cmd_analyze(cfg, log);
}

std::vector<GridCell> grid_cells(const PipelineConfig& cfg) {
  std::vector<GridCell> cells{GridCell{}};
  for (const auto& [key, values] : cfg.grid) {
    std::vector<GridCell> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        GridCell n = c;
        n.overrides[key] = v;
        n.label += (n.label.empty() ? "" : ";") + key + "=" + v;
        next.push_back(std::move(n));
      }
    }
    cells = std::move(next);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].index = i;
  return cells;
}

GridResult cmd_gridsearch(const PipelineConfig& cfg, std::size_t jobs, std::ostream& log) {
  if (cfg.grid.empty()) throw ValidationError("gridsearch: the config defines no grid.* entries");
  Stage stage(cfg, "gridsearch", log);
  const auto cells = grid_cells(cfg);
  stage.info(fmt::format("{} cells, {} at a time", cells.size(), std::max<std::size_t>(1, jobs)));

  KeyValues base = cfg.raw;
  for (auto it = base.begin(); it != base.end();) it = it->first.rfind("grid.", 0) == 0 ? base.erase(it) : std::next(it);

  std::vector<LeaderboardRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      LeaderboardRow& row = rows[i];
      row.cell = cells[i];
      const auto cell_dir = fs::absolute(cfg.output / "grid" / fmt::format("cell_{:03}", i));
      fs::create_directories(cell_dir);
      std::ofstream cell_log(cell_dir / "log.txt");
      cell_log << "cell " << i << ": " << row.cell.label << "\n";
      try {
        KeyValues kv = base;
        for (const auto& [k, v] : row.cell.overrides) kv[k] = v;
        kv["paths.output"] = cell_dir.string();
        const PipelineConfig cell_cfg = make_config(kv, cfg.base_dir);
        row.parameters = parameter_count(cell_cfg);
        cmd_run(cell_cfg, cell_log);
        const auto report = nlohmann::json::parse(io::read_file(cell_dir / "reports" / "report.json"));
        const auto& by_lang = report.at("by_language");
        row.dev_map = by_lang.contains(cfg.select_lang) ? by_lang.at(cfg.select_lang).get<double>()
                                                         : report.at("map_overall").get<double>();
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
        cell_log << "error: " << row.error << "\n";
      }
      std::lock_guard lock(log_mutex);
      log << fmt::format("gridsearch: cell {:03} {} -> {}\n", i, row.cell.label,
                         row.ok ? format_score(row.dev_map) : "failed: " + row.error);
    }
  };
  std::vector<std::thread> threads;
  const std::size_t n_threads = std::min(std::max<std::size_t>(1, jobs), cells.size());
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.ok != b.ok) return a.ok;
    if (!a.ok) return a.cell.index < b.cell.index;
    if (a.dev_map != b.dev_map) return a.dev_map > b.dev_map;
    if (a.parameters != b.parameters) return a.parameters < b.parameters;
    return a.cell.label < b.cell.label;
  });
  GridResult result;
  result.leaderboard = rows;
  if (!rows.empty() && rows.front().ok) result.best = 0;

  std::string tsv = "rank\tcell\tdev_map\tparameters\tstatus\tconfig\n";
  nlohmann::ordered_json j;
  j["select_lang"] = cfg.select_lang;
  j["cells"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    tsv += fmt::format("{}\tcell_{:03}\t{}\t{}\t{}\t{}\n", r + 1, row.cell.index,
                       row.ok ? fmt::format("{:.6f}", row.dev_map) : "-", row.parameters, row.ok ? "ok" : "failed",
                       row.cell.label);
    nlohmann::ordered_json c;
    c["cell"] = fmt::format("cell_{:03}", row.cell.index);
    c["config"] = row.cell.overrides;
    c["status"] = row.ok ? "ok" : "failed";
    if (row.ok) c["dev_map"] = row.dev_map;
    c["parameters"] = row.parameters;
    if (!row.ok) c["error"] = row.error;
    j["cells"].push_back(c);
    if (!row.ok) stage.warn(fmt::format("cell_{:03} failed: {}", row.cell.index, row.error));
  }
  if (result.best) {
    j["best"] = fmt::format("cell_{:03}", rows[0].cell.index);
    stage.info("best " + rows[0].cell.label + " (dev MAP " + format_score(rows[0].dev_map) + ")");
  } else {
    j["best"] = nullptr;
  }
  const auto dir = stage.dir("reports");
  io::write_file(dir / "leaderboard.tsv", tsv);
  io::write_file(dir / "leaderboard.json", j.dump(2) + "\n");
  stage.output(dir / "leaderboard.tsv");
  stage.output(dir / "leaderboard.json");
  stage.finish();
  return result;
}

}  // namespace jobmatch
