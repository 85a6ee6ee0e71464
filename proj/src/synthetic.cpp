#include "jobmatch/synthetic.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <unordered_set>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

const std::map<std::string, std::vector<std::string>>& filler_pools() {
  static const std::map<std::string, std::vector<std::string>> pools = {
      {"en", {"senior", "junior", "assistant", "lead", "regional", "specialist", "officer", "deputy", "chief",
              "associate"}},
      {"es", {"jefe", "auxiliar", "técnico", "adjunto", "principal", "regional", "especialista", "oficial",
              "asistente", "responsable"}},
      {"de", {"leiter", "assistent", "fachkraft", "referent", "stellvertretender", "sachbearbeiter",
              "spezialist", "oberer", "regionaler", "mitarbeiter"}},
      {"zh", {"高级", "初级", "助理", "主管", "区域", "专员", "官员", "副", "首席", "合伙"}},
  };
  return pools;
}

std::string description_for(const std::string& lang, const std::string& key) {
  if (lang == "es") return "trabajo de " + key + ": planifica y realiza tareas de " + key;
  if (lang == "de") return key + " tätigkeit: plant und erledigt aufgaben rund um " + key;
  if (lang == "zh") return key + " 工作：计划并执行 " + key + " 任务";
  return key + " work: plans and carries out " + key + " duties";
}

class TitleMaker {
 public:
  TitleMaker(const SyntheticSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  // A fresh title for the key in the language, distinct from all earlier ones.
  std::string make(const std::string& key, const std::string& lang) {
    auto it = filler_pools().find(lang);
    if (it == filler_pools().end()) throw ValidationError("synthetic: no filler pool for '" + lang + "'");
    const auto& pool = it->second;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::vector<std::string> words{key};
      for (std::size_t k : rng_.sample_indices(pool.size(), spec_.fillers_per_title)) words.push_back(pool[k]);
      rng_.shuffle(words);
      std::string title;
      for (const auto& w : words) title += (title.empty() ? "" : " ") + w;
      if (used_[lang].insert(text::fold_key(title)).second) return title;
    }
    throw Error("synthetic: could not generate a unique title");
  }

  void reserve(const std::string& lang, const std::string& title) { used_[lang].insert(text::fold_key(title)); }

 private:
  const SyntheticSpec& spec_;
  Rng& rng_;
  std::map<std::string, std::unordered_set<std::string>> used_;
};

std::vector<std::string> make_keys(std::size_t n, Rng& rng) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::unordered_set<std::string> seen;
  std::vector<std::string> keys;
  while (keys.size() < n) {
    std::string k;
    for (int i = 0; i < 5; ++i) {
      const std::string& set = i % 2 == 0 ? consonants : vowels;
      k.push_back(set[rng.below(set.size())]);
    }
    if (seen.insert(k).second) keys.push_back(k);
  }
  return keys;
}

std::string line_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k.empty() ? "\n" : k + " = " + v + "\n";
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.clusters == 0 || spec.paraphrases == 0) throw ValidationError("synthetic: empty spec");
  Rng rng(spec.seed);
  const auto keys = make_keys(spec.clusters, rng);
  TitleMaker titles(spec, rng);
  SyntheticCorpus c;

  static const int kGroups[] = {0, 1, 2, 3, 4, 5, 7, 8, 9};
  for (std::size_t k = 0; k < spec.clusters; ++k) {
    CorpusEntity occ;
    occ.entity_id = fmt::format("occ_{:02}", k);
    occ.entity_type = EntityType::occupation;
    if (k < spec.coded_clusters) occ.esco_code = fmt::format("{}{:03}.1", kGroups[k % 9], 100 + k);
    for (const auto& lang : spec.languages) {
      LanguageLabels l;
      l.preferred = titles.make(keys[k], lang);
      for (std::size_t v = 0; v < spec.training_variants; ++v) l.alternatives.push_back(titles.make(keys[k], lang));
      l.description = description_for(lang, keys[k]);
      occ.labels[lang] = std::move(l);
    }
    c.entities.push_back(std::move(occ));
  }

  // Training pairs: preferred label against each alternative.
  for (const auto& lang : spec.languages) {
    RawPairSet set{lang, {}};
    for (const auto& occ : c.entities) {
      const auto& l = occ.labels.at(lang);
      for (const auto& alt : l.alternatives) set.pairs.push_back({l.preferred, alt});
    }
    c.title_pairs.push_back(std::move(set));
  }

  // Evaluation side: fresh knowledge-base titles and queries.
  std::map<std::string, std::vector<std::vector<std::string>>> docs_by_cluster;
  for (const auto& lang : spec.languages) {
    KnowledgeBase kb{lang, {}};
    auto& by_cluster = docs_by_cluster[lang];
    by_cluster.resize(spec.clusters);
    for (std::size_t k = 0; k < spec.clusters; ++k) {
      for (std::size_t p = 0; p < spec.paraphrases; ++p) {
        const std::string id = fmt::format("{}_d{:02}_{}", lang, k, p);
        // Coded clusters list one ESCO label in the knowledge base, so part
        // of it maps to a major group.
        const bool label = p == 0 && k < spec.coded_clusters;
        kb.entries.push_back({id, label ? c.entities[k].labels.at(lang).alternatives.back() : titles.make(keys[k], lang)});
        by_cluster[k].push_back(id);
      }
    }
    // Interleave clusters so file order carries no signal.
    rng.shuffle(kb.entries);
    c.kb[lang] = std::move(kb);

    auto& queries = c.queries[lang];
    GoldStandard& gold = c.qrels[lang];
    for (std::size_t k = 0; k < spec.clusters; ++k) {
      const std::string qid = fmt::format("{}_q{:02}", lang, k);
      const bool mappable = k < spec.coded_clusters && k % 2 == 0;
      const std::string q = mappable ? c.entities[k].labels.at(lang).preferred : titles.make(keys[k], lang);
      queries.push_back({qid, q});
      gold.relevant[qid] = {by_cluster[k].begin(), by_cluster[k].end()};
      gold.query_text[qid] = q;
    }
  }
  // Cross-lingual gold: queries of the first language against the others' knowledge bases.
  if (!spec.languages.empty()) {
    const std::string& src = spec.languages.front();
    for (std::size_t t = 1; t < spec.languages.size(); ++t) {
      const std::string& tgt = spec.languages[t];
      GoldStandard& gold = c.qrels[src + "-" + tgt];
      for (std::size_t k = 0; k < spec.clusters; ++k) {
        const auto& q = c.queries[src][k];
        gold.relevant[q.qid] = {docs_by_cluster[tgt][k].begin(), docs_by_cluster[tgt][k].end()};
        gold.query_text[q.qid] = q.text;
      }
    }
  }

  // Task B: skills are English only.
  static const std::vector<std::string> verbs = {"operate", "maintain", "inspect", "calibrate", "document", "supervise"};
  static const std::vector<std::string> objects = {"equipment", "systems", "records", "processes", "materials"};
  const bool has_en = std::find(spec.languages.begin(), spec.languages.end(), "en") != spec.languages.end();
  if (has_en) {
    c.skill_pairs.language = "en";
    c.skill_kb.language = "en";
    std::vector<CorpusEntity> skills;
    for (std::size_t k = 0; k < spec.clusters; ++k) {
      std::set<std::string> gold_ids;
      for (std::size_t s = 0; s < spec.skills_per_cluster; ++s) {
        CorpusEntity skill;
        skill.entity_id = fmt::format("skill_{:02}_{}", k, s);
        skill.entity_type = EntityType::skill;
        LanguageLabels l;
        l.preferred = verbs[s % verbs.size()] + " " + keys[k] + " " + objects[(k + s) % objects.size()];
        l.alternatives.push_back(verbs[(s + 3) % verbs.size()] + " " + keys[k] + " " +
                                 objects[(k + s + 2) % objects.size()]);
        skill.labels["en"] = l;
        c.links.push_back({c.entities[k].entity_id, skill.entity_id});
        const std::string doc_id = fmt::format("s{:02}_{}", k, s);
        c.skill_kb.entries.push_back({doc_id, l.preferred});
        gold_ids.insert(doc_id);
        const auto& job = c.entities[k].labels.at("en");
        c.skill_pairs.pairs.push_back({job.preferred, l.preferred});
        for (const auto& alt : job.alternatives) c.skill_pairs.pairs.push_back({alt, l.preferred});
        skills.push_back(std::move(skill));
      }
      const std::string qid = fmt::format("bq{:02}", k);
      const std::string q = titles.make(keys[k], "en");
      c.skill_queries.push_back({qid, q});
      c.skill_qrels.relevant[qid] = gold_ids;
      c.skill_qrels.query_text[qid] = q;
    }
    rng.shuffle(c.skill_kb.entries);
    for (auto& s : skills) c.entities.push_back(std::move(s));
  }
  return c;
}

void write_synthetic(const SyntheticCorpus& c, const SyntheticSpec& spec, const std::filesystem::path& dir) {
  write_entities(dir / "entities.tsv", c.entities);
  write_pairs(dir / "pairs.tsv", c.title_pairs);
  for (const auto& [lang, kb] : c.kb) write_kb(dir / fmt::format("kb_{}.tsv", lang), kb);
  for (const auto& [lang, q] : c.queries) write_queries(dir / fmt::format("queries_{}.tsv", lang), q);
  for (const auto& [lang, g] : c.qrels) write_qrels(dir / fmt::format("qrels_{}.txt", lang), g);
  const bool task_b = !c.skill_kb.entries.empty();
  if (task_b) {
    write_pairs(dir / "skill_pairs.tsv", {c.skill_pairs});
    write_links(dir / "links.tsv", c.links);
    write_kb(dir / "kb_skills.tsv", c.skill_kb);
    write_queries(dir / "queries_skills.tsv", c.skill_queries);
    write_qrels(dir / "qrels_skills.txt", c.skill_qrels);
  }

  std::string langs;
  std::vector<std::pair<std::string, std::string>> data_a = {{"task", "A"}};
  for (const auto& l : spec.languages) langs += (langs.empty() ? "" : ",") + l;
  for (std::size_t t = 1; t < spec.languages.size(); ++t) langs += "," + spec.languages[0] + "-" + spec.languages[t];
  data_a.push_back({"languages", langs});
  data_a.push_back({"seed", "13"});
  data_a.push_back({"paths.entities", "entities.tsv"});
  data_a.push_back({"paths.pairs", "pairs.tsv"});
  for (const auto& l : spec.languages) {
    data_a.push_back({"paths.kb." + l, fmt::format("kb_{}.tsv", l)});
    data_a.push_back({"paths.queries." + l, fmt::format("queries_{}.tsv", l)});
  }
  for (const auto& [key, _] : c.qrels) data_a.push_back({"paths.qrels." + key, fmt::format("qrels_{}.txt", key)});
  data_a.push_back({"encoder.hash_dim", "4096"});
  data_a.push_back({"encoder.embed_dim", "64"});

  const std::vector<std::pair<std::string, std::string>> contrastive = {
      {"contrastive.k_negatives", "16"}, {"contrastive.batch_size", "32"}, {"contrastive.learning_rate", "300"},
      {"contrastive.epochs", "50"},      {"contrastive.symmetric", "true"}, {"contrastive.heldout_frac", "0.1"}};
  const std::vector<std::pair<std::string, std::string>> classify = {
      {"sampler.neg_ratio", "2"},          {"sampler.per_language", "true"}, {"classifier.learning_rate", "20"},
      {"classifier.batch_size", "32"},     {"classifier.epochs", "20"}};

  auto emit = [&](const std::string& name, std::vector<std::pair<std::string, std::string>> base,
                  const std::string& method, const std::vector<std::pair<std::string, std::string>>& extra) {
    base.insert(base.begin() + 1, {"method", method});
    base.push_back({"paths.output", "out/" + name});
    base.push_back({"", ""});
    base.insert(base.end(), extra.begin(), extra.end());
    io::write_file(dir / (name + ".cfg"), "# Synthetic fixture pipeline configuration.\n" + line_config(base));
  };
  emit("task_a_contrastive", data_a, "contrastive", contrastive);
  emit("task_a_classify", data_a, "classify", classify);
  emit("task_a_prompt", data_a, "prompt", {});
  auto grid = classify;
  grid.push_back({"grid.sampler.neg_ratio", "1,2,5"});
  grid.push_back({"eval.select_lang", "en"});
  emit("task_a_grid_ratio", data_a, "classify", grid);

  if (task_b) {
    std::vector<std::pair<std::string, std::string>> data_b = {
        {"task", "B"},
        {"languages", "en"},
        {"seed", "13"},
        {"paths.entities", "entities.tsv"},
        {"paths.pairs", "skill_pairs.tsv"},
        {"paths.links", "links.tsv"},
        {"paths.kb.en", "kb_skills.tsv"},
        {"paths.queries.en", "queries_skills.tsv"},
        {"paths.qrels.en", "qrels_skills.txt"},
        {"encoder.hash_dim", "4096"},
        {"encoder.embed_dim", "64"},
    };
    auto classify_b = classify;
    classify_b[0] = {"sampler.neg_ratio", "1"};
    emit("task_b_classify", data_b, "classify", classify_b);
    emit("task_b_contrastive", data_b, "contrastive", contrastive);
    emit("task_b_prompt", data_b, "prompt", {});
  }
}

std::vector<LabeledPair> synthetic_heldout_pairs(const SyntheticCorpus& corpus, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledPair> out;
  for (const auto& [lang, queries] : corpus.queries) {
    const KnowledgeBase& kb = corpus.kb.at(lang);
    const GoldStandard& gold = corpus.qrels.at(lang);
    for (const auto& q : queries) {
      const auto& rel = gold.relevant.at(q.qid);
      std::vector<const KbEntry*> others;
      for (const auto& e : kb.entries) {
        if (rel.count(e.doc_id)) {
          out.push_back({q.text, e.text, 1, PairOrigin::gold});
        } else {
          others.push_back(&e);
        }
      }
      for (std::size_t i : rng.sample_indices(others.size(), rel.size())) {
        out.push_back({q.text, others[i]->text, 0, PairOrigin::sampled_negative});
      }
    }
  }
  return out;
}

}  // namespace jobmatch
