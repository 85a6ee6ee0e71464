#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jobmatch/corpus.hpp"

namespace jobmatch {

enum class PairOrigin { gold, sampled_negative };

struct LabeledPair {
  std::string query;
  std::string document;
  int label = 1;  // 1 = related, 0 = unrelated
  PairOrigin origin = PairOrigin::gold;

  bool operator==(const LabeledPair&) const = default;
};

enum class PairType { title_description, title_alt_title, job_skill, job_alt_skill, alt_job_skill };

std::string to_string(PairType t);
PairType parse_pair_type(const std::string& s);

struct ContrastivePair {
  std::string anchor;
  std::string positive;
  PairType pair_type = PairType::title_alt_title;

  bool operator==(const ContrastivePair&) const = default;
};

// Negatives come from the distinct related-side texts of the pair set: titles
// for Task A, the skill vocabulary of the training rows for Task B.
struct SamplerConfig {
  double neg_ratio = 2.0;  // negatives per positive
  std::uint64_t seed = 0;

  static SamplerConfig ratio_1_1(std::uint64_t seed = 0) { return {1.0, seed}; }
  static SamplerConfig ratio_1_2(std::uint64_t seed = 0) { return {2.0, seed}; }
  static SamplerConfig ratio_1_5(std::uint64_t seed = 0) { return {5.0, seed}; }
};

struct ClassificationStats {
  std::size_t queries = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t duplicate_positives = 0;
  // Queries whose pool held fewer candidates than the requested negatives.
  std::size_t short_pool_warnings = 0;
};

struct ClassificationSet {
  std::vector<LabeledPair> pairs;
  ClassificationStats stats;
};

// Gold pairs get label 1. Each query receives ceil(neg_ratio * #positives)
// negatives drawn without replacement from the distinct related-side texts,
// excluding the query's positives and the query itself. Output order is a
// seeded shuffle.
ClassificationSet make_classification_set(const RawPairSet& pairs, const SamplerConfig& cfg);

// Multilingual variant. With per_language each set samples from its own pool;
// otherwise the sets are concatenated first and share one pool.
ClassificationSet make_classification_set(const std::vector<RawPairSet>& sets,
                                          const SamplerConfig& cfg, bool per_language);

enum class Task { A, B };

std::string to_string(Task t);
Task parse_task(const std::string& s);

// A gold job-to-skill association by entity id.
struct JobSkillLink {
  std::string job_id;
  std::string skill_id;
};

struct ContrastiveStats {
  std::map<PairType, std::size_t> by_type;
  std::size_t entities_without_pairs = 0;
  std::size_t identical_pairs_skipped = 0;
  std::size_t unresolved_links = 0;
};

struct ContrastiveSet {
  std::vector<ContrastivePair> pairs;
  ContrastiveStats stats;
};

// Task A: per occupation and language, (preferred, description) then
// (preferred, alternative) pairs. Task B: for every link, job preferred ->
// skill preferred, job preferred -> each skill alternative, each job
// alternative -> skill preferred. Links are only consulted for Task B.
ContrastiveSet make_contrastive_set(const std::vector<CorpusEntity>& entities, Task task,
                                    const std::vector<std::string>& languages,
                                    const std::vector<JobSkillLink>& links = {});

// Resolves (job title, skill text) training rows to entity links by exact
// folded match on preferred or alternative labels. Unresolvable rows are
// skipped and counted in *unresolved.
std::vector<JobSkillLink> resolve_links(const RawPairSet& pairs,
                                        const std::vector<CorpusEntity>& entities,
                                        std::size_t* unresolved = nullptr);

enum class PairSide { anchor, positive };

// Distinct texts of one side, sorted.
std::vector<std::string> negative_pool(const std::vector<ContrastivePair>& pairs, PairSide side);

// labeled_pairs.tsv: query, document, label.
void write_labeled_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);
// contrastive_pairs.tsv: anchor, positive, pair_type.
void write_contrastive_pairs(const std::filesystem::path& path,
                             const std::vector<ContrastivePair>& pairs);
std::vector<ContrastivePair> load_contrastive_pairs(const std::filesystem::path& path);
// links.tsv: job_id, skill_id.
std::vector<JobSkillLink> load_links(const std::filesystem::path& path);
void write_links(const std::filesystem::path& path, const std::vector<JobSkillLink>& links);

std::string stats_json(const ClassificationStats& stats);
std::string stats_json(const ContrastiveStats& stats);

}  // namespace jobmatch
