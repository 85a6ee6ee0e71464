#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace jobmatch {

enum class EntityType { occupation, skill };

std::string to_string(EntityType t);
EntityType parse_entity_type(const std::string& s);

struct LanguageLabels {
  std::string preferred;
  std::vector<std::string> alternatives;
  std::optional<std::string> description;
};

// An ESCO occupation or skill. Labels are keyed by language code.
struct CorpusEntity {
  std::string entity_id;
  EntityType entity_type = EntityType::occupation;
  std::optional<std::string> esco_code;
  std::map<std::string, LanguageLabels> labels;

  // First digit of the ESCO code, if any.
  std::optional<int> major_group() const;
};

struct KbEntry {
  std::string doc_id;
  std::string text;
};

struct KnowledgeBase {
  std::string language;
  std::vector<KbEntry> entries;

  std::size_t size() const { return entries.size(); }
};

struct GoldStandard {
  std::map<std::string, std::set<std::string>> relevant;
  std::map<std::string, std::string> query_text;
};

struct TitlePair {
  std::string query;
  std::string related;

  bool operator==(const TitlePair&) const = default;
};

struct RawPairSet {
  std::string language;
  std::vector<TitlePair> pairs;

  // Number of rows that repeat an earlier (query, related) row.
  std::size_t duplicate_count() const;
};

struct Query {
  std::string qid;
  std::string text;
};

enum class Schema { entities, kb, qrels, pairs, queries };

using CorpusData = std::variant<std::vector<CorpusEntity>, KnowledgeBase, GoldStandard,
                                std::vector<RawPairSet>, std::vector<Query>>;

// Dispatching loader. The typed loaders below are usually more convenient.
CorpusData load_corpus(const std::filesystem::path& path, Schema schema);

// entities.tsv: entity_id, entity_type, esco_code, lang, label_type, text.
// Rows of one entity must be contiguous. A header row is optional.
std::vector<CorpusEntity> load_entities(const std::filesystem::path& path);
// kb.tsv: doc_id, text.
KnowledgeBase load_kb(const std::filesystem::path& path, const std::string& language);
// qrels.txt: "qid 0 docid rel". Rows with rel <= 0 are not relevance judgements.
GoldStandard load_qrels(const std::filesystem::path& path);
// pairs.tsv: lang, query_text, related_text. One set per language, in order of
// first appearance.
std::vector<RawPairSet> load_pairs(const std::filesystem::path& path);
// queries.tsv: qid, query_text.
std::vector<Query> load_queries(const std::filesystem::path& path);

void write_entities(const std::filesystem::path& path, const std::vector<CorpusEntity>& entities);
void write_kb(const std::filesystem::path& path, const KnowledgeBase& kb);
void write_qrels(const std::filesystem::path& path, const GoldStandard& qrels);
void write_pairs(const std::filesystem::path& path, const std::vector<RawPairSet>& sets);
void write_queries(const std::filesystem::path& path, const std::vector<Query>& queries);

// Copies query texts into the gold standard for every judged query.
void attach_query_text(GoldStandard& gold, const std::vector<Query>& queries);

// Concatenation in input order; the result is tagged "multi".
RawPairSet concat_pairsets(const std::vector<RawPairSet>& sets);

// Exact (trim + NFC + case-fold) lookup of titles against occupation labels.
// Preferred labels take precedence over alternatives; among several matching
// occupations the lexicographically lowest ESCO code wins.
class MajorGroupIndex {
 public:
  explicit MajorGroupIndex(const std::vector<CorpusEntity>& entities);

  std::optional<int> lookup(const std::string& title) const;
  std::optional<std::string> lookup_code(const std::string& title) const;

 private:
  std::unordered_map<std::string, std::string> preferred_;
  std::unordered_map<std::string, std::string> alternative_;
};

std::optional<int> map_title_to_major_group(const std::string& title,
                                            const std::vector<CorpusEntity>& entities);

struct CoverageStats {
  std::size_t total = 0;
  std::size_t mapped = 0;
  double unmapped_pct = 0.0;

  std::size_t unmapped() const { return total - mapped; }
};

CoverageStats coverage_from_counts(std::size_t total, std::size_t mapped);
CoverageStats coverage_stats(const KnowledgeBase& kb, const MajorGroupIndex& index);
CoverageStats coverage_stats(const KnowledgeBase& kb, const std::vector<CorpusEntity>& entities);

}  // namespace jobmatch
