#include "jobmatch/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/random.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

struct QueryGroup {
  std::string query;
  std::vector<std::size_t> rows;
};

// Samples negatives for every query of one pair set, without the final shuffle.
std::vector<LabeledPair> sample_set(const RawPairSet& set, double neg_ratio, std::uint64_t seed,
                                    ClassificationStats& stats) {
  // Distinct related-side texts in first-appearance order.
  std::vector<std::string> pool;
  std::vector<std::string> pool_keys;
  {
    std::unordered_set<std::string> seen;
    for (const auto& p : set.pairs) {
      if (seen.insert(p.related).second) {
        pool.push_back(p.related);
        pool_keys.push_back(text::fold_key(p.related));
      }
    }
  }
  std::unordered_map<std::string, std::size_t> key_count;
  for (const auto& k : pool_keys) ++key_count[k];

  std::vector<QueryGroup> groups;
  {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < set.pairs.size(); ++r) {
      auto [it, inserted] = index.emplace(set.pairs[r].query, groups.size());
      if (inserted) groups.push_back({set.pairs[r].query, {}});
      groups[it->second].rows.push_back(r);
    }
  }

  std::vector<std::vector<LabeledPair>> per_query(groups.size());
  std::vector<char> short_pool(groups.size(), 0);
  const long n_groups = static_cast<long>(groups.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (long g = 0; g < n_groups; ++g) {
    const QueryGroup& group = groups[g];
    std::unordered_set<std::string> excluded;
    excluded.insert(text::fold_key(group.query));
    for (std::size_t r : group.rows) excluded.insert(text::fold_key(set.pairs[r].related));

    std::size_t blocked = 0;
    for (const auto& k : excluded) {
      if (auto it = key_count.find(k); it != key_count.end()) blocked += it->second;
    }
    const std::size_t available = pool.size() - blocked;
    const auto want = static_cast<std::size_t>(
        std::ceil(neg_ratio * static_cast<double>(group.rows.size()) - 1e-9));

    auto& out = per_query[g];
    for (std::size_t r : group.rows) out.push_back({group.query, set.pairs[r].related, 1, PairOrigin::gold});

    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g)));
    std::vector<std::size_t> chosen;
    if (want >= available) {
      if (want > available) short_pool[g] = 1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!excluded.count(pool_keys[i])) chosen.push_back(i);
      }
    } else if (2 * available >= pool.size()) {
      std::unordered_set<std::size_t> taken;
      while (chosen.size() < want) {
        auto i = static_cast<std::size_t>(rng.below(pool.size()));
        if (excluded.count(pool_keys[i]) || !taken.insert(i).second) continue;
        chosen.push_back(i);
      }
    } else {
      std::vector<std::size_t> allowed;
      allowed.reserve(available);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!excluded.count(pool_keys[i])) allowed.push_back(i);
      }
      for (std::size_t k : rng.sample_indices(allowed.size(), want)) chosen.push_back(allowed[k]);
    }
    for (std::size_t i : chosen) out.push_back({group.query, pool[i], 0, PairOrigin::sampled_negative});
  }

  std::vector<LabeledPair> all;
  stats.queries += groups.size();
  stats.positives += set.pairs.size();
  stats.duplicate_positives += set.duplicate_count();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    stats.short_pool_warnings += short_pool[g];
    stats.negatives += per_query[g].size() - groups[g].rows.size();
    std::move(per_query[g].begin(), per_query[g].end(), std::back_inserter(all));
  }
  return all;
}

void check_ratio(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw ValidationError("neg_ratio must be a positive number");
  }
}

std::vector<std::string_view> tsv_row(const std::string& file, std::size_t line_no,
                                      const std::string& line, std::size_t n) {
  auto cols = text::split(line, '\t');
  if (cols.size() != n) {
    throw ParseError(file, line_no, "<row>", "expected " + std::to_string(n) + " columns");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (cols[i].empty()) throw ParseError(file, line_no, std::to_string(i + 1), "empty value");
  }
  return cols;
}

}  // namespace

std::string to_string(PairType t) {
  switch (t) {
    case PairType::title_description:
      return "title->description";
    case PairType::title_alt_title:
      return "title->alt_title";
    case PairType::job_skill:
      return "job->skill";
    case PairType::job_alt_skill:
      return "job->alt_skill";
    case PairType::alt_job_skill:
      return "alt_job->skill";
  }
  return "?";
}

PairType parse_pair_type(const std::string& s) {
  for (PairType t : {PairType::title_description, PairType::title_alt_title, PairType::job_skill,
                     PairType::job_alt_skill, PairType::alt_job_skill}) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown pair_type '" + s + "'");
}

std::string to_string(Task t) { return t == Task::A ? "A" : "B"; }

Task parse_task(const std::string& s) {
  if (s == "A" || s == "a") return Task::A;
  if (s == "B" || s == "b") return Task::B;
  throw ValidationError("task must be A or B, got '" + s + "'");
}

ClassificationSet make_classification_set(const RawPairSet& pairs, const SamplerConfig& cfg) {
  return make_classification_set(std::vector<RawPairSet>{pairs}, cfg, true);
}

ClassificationSet make_classification_set(const std::vector<RawPairSet>& sets,
                                          const SamplerConfig& cfg, bool per_language) {
  check_ratio(cfg.neg_ratio);
  std::size_t total = 0;
  for (const auto& s : sets) total += s.pairs.size();
  if (total == 0) throw ValidationError("make_classification_set: no pairs");

  ClassificationSet result;
  if (per_language) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
      auto part = sample_set(sets[i], cfg.neg_ratio, mix_seed(cfg.seed, i), result.stats);
      std::move(part.begin(), part.end(), std::back_inserter(result.pairs));
    }
  } else {
    result.pairs = sample_set(concat_pairsets(sets), cfg.neg_ratio, mix_seed(cfg.seed, 0), result.stats);
  }
  Rng(mix_seed(cfg.seed, kShuffleStream)).shuffle(result.pairs);
  return result;
}

ContrastiveSet make_contrastive_set(const std::vector<CorpusEntity>& entities, Task task,
                                    const std::vector<std::string>& languages,
                                    const std::vector<JobSkillLink>& links) {
  ContrastiveSet result;
  auto emit = [&](const std::string& anchor, const std::string& positive, PairType type) {
    if (text::fold_key(anchor) == text::fold_key(positive)) {
      ++result.stats.identical_pairs_skipped;
      return false;
    }
    result.pairs.push_back({anchor, positive, type});
    ++result.stats.by_type[type];
    return true;
  };

  if (task == Task::A) {
    for (const auto& e : entities) {
      if (e.entity_type != EntityType::occupation) continue;
      bool any = false;
      for (const auto& lang : languages) {
        auto it = e.labels.find(lang);
        if (it == e.labels.end()) continue;
        const LanguageLabels& l = it->second;
        if (l.description) any |= emit(l.preferred, *l.description, PairType::title_description);
        for (const auto& alt : l.alternatives) any |= emit(l.preferred, alt, PairType::title_alt_title);
      }
      if (!any) ++result.stats.entities_without_pairs;
    }
    return result;
  }

  std::unordered_map<std::string, const CorpusEntity*> by_id;
  for (const auto& e : entities) by_id.emplace(e.entity_id, &e);
  std::unordered_set<std::string> productive;
  for (const auto& link : links) {
    auto job = by_id.find(link.job_id);
    auto skill = by_id.find(link.skill_id);
    if (job == by_id.end() || skill == by_id.end()) {
      ++result.stats.unresolved_links;
      continue;
    }
    for (const auto& lang : languages) {
      auto jl = job->second->labels.find(lang);
      auto sl = skill->second->labels.find(lang);
      if (jl == job->second->labels.end() || sl == skill->second->labels.end()) continue;
      bool any = emit(jl->second.preferred, sl->second.preferred, PairType::job_skill);
      for (const auto& alt : sl->second.alternatives) {
        any |= emit(jl->second.preferred, alt, PairType::job_alt_skill);
      }
      for (const auto& alt : jl->second.alternatives) {
        any |= emit(alt, sl->second.preferred, PairType::alt_job_skill);
      }
      if (any) productive.insert(link.job_id);
    }
  }
  for (const auto& e : entities) {
    if (e.entity_type == EntityType::occupation && !productive.count(e.entity_id)) {
      ++result.stats.entities_without_pairs;
    }
  }
  return result;
}

std::vector<JobSkillLink> resolve_links(const RawPairSet& pairs,
                                        const std::vector<CorpusEntity>& entities,
                                        std::size_t* unresolved) {
  std::unordered_map<std::string, std::string> jobs;
  std::unordered_map<std::string, std::string> skills;
  for (const auto& e : entities) {
    auto& table = e.entity_type == EntityType::occupation ? jobs : skills;
    for (const auto& [lang, l] : e.labels) {
      table.emplace(text::fold_key(l.preferred), e.entity_id);
      for (const auto& alt : l.alternatives) table.emplace(text::fold_key(alt), e.entity_id);
    }
  }
  std::vector<JobSkillLink> links;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t missing = 0;
  for (const auto& p : pairs.pairs) {
    auto j = jobs.find(text::fold_key(p.query));
    auto s = skills.find(text::fold_key(p.related));
    if (j == jobs.end() || s == skills.end()) {
      ++missing;
      continue;
    }
    if (seen.emplace(j->second, s->second).second) links.push_back({j->second, s->second});
  }
  if (unresolved) *unresolved = missing;
  return links;
}

std::vector<std::string> negative_pool(const std::vector<ContrastivePair>& pairs, PairSide side) {
  if (pairs.empty()) throw ValidationError("negative_pool: empty pair list");
  std::set<std::string> texts;
  for (const auto& p : pairs) texts.insert(side == PairSide::anchor ? p.anchor : p.positive);
  return {texts.begin(), texts.end()};
}

void write_labeled_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs) {
  std::string out = "query\tdocument\tlabel\n";
  for (const auto& p : pairs) out += p.query + "\t" + p.document + "\t" + std::to_string(p.label) + "\n";
  io::write_file(path, out);
}

std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || (i == 0 && lines[i] == "query\tdocument\tlabel")) continue;
    auto cols = tsv_row(path.string(), i + 1, lines[i], 3);
    if (cols[2] != "0" && cols[2] != "1") throw ParseError(path.string(), i + 1, "label", "must be 0 or 1");
    const int label = cols[2] == "1" ? 1 : 0;
    out.push_back({std::string(cols[0]), std::string(cols[1]), label,
                   label ? PairOrigin::gold : PairOrigin::sampled_negative});
  }
  return out;
}

void write_contrastive_pairs(const std::filesystem::path& path,
                             const std::vector<ContrastivePair>& pairs) {
  std::string out = "anchor\tpositive\tpair_type\n";
  for (const auto& p : pairs) out += p.anchor + "\t" + p.positive + "\t" + to_string(p.pair_type) + "\n";
  io::write_file(path, out);
}

std::vector<ContrastivePair> load_contrastive_pairs(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<ContrastivePair> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || (i == 0 && lines[i] == "anchor\tpositive\tpair_type")) continue;
    auto cols = tsv_row(path.string(), i + 1, lines[i], 3);
    PairType type;
    try {
      type = parse_pair_type(std::string(cols[2]));
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), i + 1, "pair_type", e.what());
    }
    out.push_back({std::string(cols[0]), std::string(cols[1]), type});
  }
  return out;
}

std::vector<JobSkillLink> load_links(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<JobSkillLink> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || (i == 0 && lines[i] == "job_id\tskill_id")) continue;
    auto cols = tsv_row(path.string(), i + 1, lines[i], 2);
    out.push_back({std::string(cols[0]), std::string(cols[1])});
  }
  return out;
}

void write_links(const std::filesystem::path& path, const std::vector<JobSkillLink>& links) {
  std::string out = "job_id\tskill_id\n";
  for (const auto& l : links) out += l.job_id + "\t" + l.skill_id + "\n";
  io::write_file(path, out);
}

std::string stats_json(const ClassificationStats& stats) {
  nlohmann::ordered_json j;
  j["queries"] = stats.queries;
  j["positives"] = stats.positives;
  j["negatives"] = stats.negatives;
  j["duplicate_positives"] = stats.duplicate_positives;
  j["short_pool_warnings"] = stats.short_pool_warnings;
  return j.dump(2) + "\n";
}

std::string stats_json(const ContrastiveStats& stats) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json by_type = nlohmann::ordered_json::object();
  for (const auto& [type, n] : stats.by_type) by_type[to_string(type)] = n;
  j["by_type"] = by_type;
  j["entities_without_pairs"] = stats.entities_without_pairs;
  j["identical_pairs_skipped"] = stats.identical_pairs_skipped;
  j["unresolved_links"] = stats.unresolved_links;
  return j.dump(2) + "\n";
}

}  // namespace jobmatch
