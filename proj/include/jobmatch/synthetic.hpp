#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jobmatch/corpus.hpp"
#include "jobmatch/pairs.hpp"

namespace jobmatch {

// Desk-scale stand-in for the shared-task data. Each cluster is one
// occupation whose titles share a cluster-specific key word; every title also
// carries filler words drawn from a small per-language pool, so raw n-gram
// overlap is a noisy but learnable relevance signal.
struct SyntheticSpec {
  std::size_t clusters = 20;
  std::size_t paraphrases = 5;         // knowledge-base titles per cluster and language
  std::size_t training_variants = 6;   // alternative labels per occupation and language
  std::size_t fillers_per_title = 3;
  std::size_t skills_per_cluster = 3;
  std::size_t coded_clusters = 15;     // clusters that receive an ESCO code
  std::vector<std::string> languages = {"en", "es", "de"};
  std::uint64_t seed = 2025;
};

struct SyntheticCorpus {
  std::vector<CorpusEntity> entities;  // occupations then skills
  std::vector<RawPairSet> title_pairs;  // Task A training rows, one set per language
  std::map<std::string, KnowledgeBase> kb;  // Task A, by language
  std::map<std::string, std::vector<Query>> queries;
  std::map<std::string, GoldStandard> qrels;

  RawPairSet skill_pairs;  // Task B training rows (en)
  std::vector<JobSkillLink> links;
  KnowledgeBase skill_kb;
  std::vector<Query> skill_queries;
  GoldStandard skill_qrels;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec = {});

// Writes the corpus files plus ready-to-run pipeline configs
// (task_a_*.cfg, task_b_*.cfg) into dir.
void write_synthetic(const SyntheticCorpus& corpus, const SyntheticSpec& spec,
                     const std::filesystem::path& dir);

// Held-out labeled pairs built from the evaluation side of the corpus: each
// query with its gold titles (label 1) and as many titles of other clusters
// (label 0).
std::vector<LabeledPair> synthetic_heldout_pairs(const SyntheticCorpus& corpus, std::uint64_t seed);

}  // namespace jobmatch
