#include "jobmatch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

constexpr const char* kEntityHeader = "entity_id\tentity_type\tesco_code\tlang\tlabel_type\ttext";
constexpr const char* kKbHeader = "doc_id\ttext";
constexpr const char* kPairsHeader = "lang\tquery_text\trelated_text";
constexpr const char* kQueriesHeader = "qid\tquery_text";

bool valid_esco_code(const std::string& code) {
  if (code.empty() || code[0] < '0' || code[0] > '9') return false;
  return std::all_of(code.begin(), code.end(),
                     [](char c) { return (c >= '0' && c <= '9') || c == '.'; });
}

// Splits a tab-separated row and checks the column count.
std::vector<std::string_view> columns(const std::string& file, std::size_t line_no,
                                      const std::string& line, std::size_t expected) {
  auto cols = text::split(line, '\t');
  if (cols.size() != expected) {
    throw ParseError(file, line_no, "<row>",
                     "expected " + std::to_string(expected) + " tab-separated columns, got " +
                         std::to_string(cols.size()));
  }
  return cols;
}

std::string required(const std::string& file, std::size_t line_no, const std::string& column,
                     std::string_view raw) {
  std::string value = text::normalize(raw);
  if (value.empty()) throw ParseError(file, line_no, column, "empty value");
  return value;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

std::string to_string(EntityType t) { return t == EntityType::occupation ? "occupation" : "skill"; }

EntityType parse_entity_type(const std::string& s) {
  if (s == "occupation") return EntityType::occupation;
  if (s == "skill") return EntityType::skill;
  throw ValidationError("unknown entity_type '" + s + "'");
}

std::optional<int> CorpusEntity::major_group() const {
  if (!esco_code || esco_code->empty()) return std::nullopt;
  return (*esco_code)[0] - '0';
}

std::size_t RawPairSet::duplicate_count() const {
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t dups = 0;
  for (const auto& p : pairs) {
    if (!seen.emplace(p.query, p.related).second) ++dups;
  }
  return dups;
}

std::vector<CorpusEntity> load_entities(const std::filesystem::path& path) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  std::vector<CorpusEntity> entities;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::size_t> first_line;
  // Normalized alternatives of the current entity, per language.
  std::map<std::string, std::unordered_set<std::string>> alt_keys;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string& line = lines[i];
    if (is_blank(line)) continue;
    if (i == 0 && line == kEntityHeader) continue;
    auto cols = columns(file, line_no, line, 6);
    std::string id = required(file, line_no, "entity_id", cols[0]);
    std::string type_str = required(file, line_no, "entity_type", cols[1]);
    std::string code = text::normalize(cols[2]);
    std::string lang = required(file, line_no, "lang", cols[3]);
    std::string label_type = required(file, line_no, "label_type", cols[4]);
    std::string value = required(file, line_no, "text", cols[5]);

    EntityType type;
    try {
      type = parse_entity_type(type_str);
    } catch (const ValidationError& e) {
      throw ParseError(file, line_no, "entity_type", e.what());
    }
    if (!code.empty() && !valid_esco_code(code)) {
      throw ParseError(file, line_no, "esco_code", "'" + code + "' is not a digit-and-dot code");
    }

    if (entities.empty() || entities.back().entity_id != id) {
      if (!seen_ids.insert(id).second) {
        throw ParseError(file, line_no, "entity_id", "duplicate entity_id '" + id + "'");
      }
      CorpusEntity e;
      e.entity_id = id;
      e.entity_type = type;
      if (!code.empty()) e.esco_code = code;
      entities.push_back(std::move(e));
      first_line.push_back(line_no);
      alt_keys.clear();
    }
    CorpusEntity& entity = entities.back();
    if (entity.entity_type != type) {
      throw ParseError(file, line_no, "entity_type", "conflicts with earlier rows of '" + id + "'");
    }
    if (entity.esco_code.value_or("") != code) {
      throw ParseError(file, line_no, "esco_code", "conflicts with earlier rows of '" + id + "'");
    }

    LanguageLabels& labels = entity.labels[lang];
    if (label_type == "preferred") {
      if (!labels.preferred.empty()) {
        throw ParseError(file, line_no, "label_type", "second preferred label for '" + id + "'");
      }
      labels.preferred = std::move(value);
    } else if (label_type == "alternative") {
      if (alt_keys[lang].insert(text::fold_key(value)).second) {
        labels.alternatives.push_back(std::move(value));
      }
    } else if (label_type == "description") {
      if (labels.description) {
        throw ParseError(file, line_no, "label_type", "second description for '" + id + "'");
      }
      labels.description = std::move(value);
    } else {
      throw ParseError(file, line_no, "label_type", "unknown label_type '" + label_type + "'");
    }
  }

  for (std::size_t k = 0; k < entities.size(); ++k) {
    for (const auto& [lang, labels] : entities[k].labels) {
      if (labels.preferred.empty()) {
        throw ParseError(file, first_line[k], "label_type",
                         "entity '" + entities[k].entity_id + "' has no preferred label for '" +
                             lang + "'");
      }
    }
  }
  return entities;
}

KnowledgeBase load_kb(const std::filesystem::path& path, const std::string& language) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  KnowledgeBase kb;
  kb.language = language;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    if (i == 0 && lines[i] == kKbHeader) continue;
    auto cols = columns(file, line_no, lines[i], 2);
    KbEntry entry{required(file, line_no, "doc_id", cols[0]),
                  required(file, line_no, "text", cols[1])};
    if (!ids.insert(entry.doc_id).second) {
      throw ParseError(file, line_no, "doc_id", "duplicate doc_id '" + entry.doc_id + "'");
    }
    kb.entries.push_back(std::move(entry));
  }
  return kb;
}

GoldStandard load_qrels(const std::filesystem::path& path) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  GoldStandard gold;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::istringstream ss(lines[i]);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 4) {
      throw ParseError(file, line_no, "<row>",
                       "expected 'qid 0 docid rel', got " + std::to_string(fields.size()) +
                           " fields");
    }
    int rel = 0;
    try {
      std::size_t used = 0;
      rel = std::stoi(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(file, line_no, "rel", "not an integer: '" + fields[3] + "'");
    }
    if (rel > 0) gold.relevant[fields[0]].insert(fields[2]);
  }
  return gold;
}

std::vector<RawPairSet> load_pairs(const std::filesystem::path& path) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  std::vector<RawPairSet> sets;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    if (i == 0 && lines[i] == kPairsHeader) continue;
    auto cols = columns(file, line_no, lines[i], 3);
    std::string lang = required(file, line_no, "lang", cols[0]);
    TitlePair pair{required(file, line_no, "query_text", cols[1]),
                   required(file, line_no, "related_text", cols[2])};
    auto [it, inserted] = index.emplace(lang, sets.size());
    if (inserted) sets.push_back(RawPairSet{lang, {}});
    sets[it->second].pairs.push_back(std::move(pair));
  }
  return sets;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  std::vector<Query> queries;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    if (i == 0 && lines[i] == kQueriesHeader) continue;
    auto cols = columns(file, line_no, lines[i], 2);
    Query q{required(file, line_no, "qid", cols[0]), required(file, line_no, "query_text", cols[1])};
    if (!ids.insert(q.qid).second) {
      throw ParseError(file, line_no, "qid", "duplicate qid '" + q.qid + "'");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

CorpusData load_corpus(const std::filesystem::path& path, Schema schema) {
  switch (schema) {
    case Schema::entities:
      return load_entities(path);
    case Schema::kb:
      return load_kb(path, path.stem().string());
    case Schema::qrels:
      return load_qrels(path);
    case Schema::pairs:
      return load_pairs(path);
    case Schema::queries:
      return load_queries(path);
  }
  throw ValidationError("unknown schema");
}

void write_entities(const std::filesystem::path& path, const std::vector<CorpusEntity>& entities) {
  std::string out = std::string(kEntityHeader) + "\n";
  for (const auto& e : entities) {
    const std::string prefix =
        e.entity_id + "\t" + to_string(e.entity_type) + "\t" + e.esco_code.value_or("") + "\t";
    for (const auto& [lang, labels] : e.labels) {
      out += prefix + lang + "\tpreferred\t" + labels.preferred + "\n";
      for (const auto& alt : labels.alternatives) out += prefix + lang + "\talternative\t" + alt + "\n";
      if (labels.description) out += prefix + lang + "\tdescription\t" + *labels.description + "\n";
    }
  }
  io::write_file(path, out);
}

void write_kb(const std::filesystem::path& path, const KnowledgeBase& kb) {
  std::string out = std::string(kKbHeader) + "\n";
  for (const auto& e : kb.entries) out += e.doc_id + "\t" + e.text + "\n";
  io::write_file(path, out);
}

void write_qrels(const std::filesystem::path& path, const GoldStandard& qrels) {
  std::string out;
  for (const auto& [qid, docs] : qrels.relevant) {
    for (const auto& doc : docs) out += qid + " 0 " + doc + " 1\n";
  }
  io::write_file(path, out);
}

void write_pairs(const std::filesystem::path& path, const std::vector<RawPairSet>& sets) {
  std::string out = std::string(kPairsHeader) + "\n";
  for (const auto& set : sets) {
    for (const auto& p : set.pairs) out += set.language + "\t" + p.query + "\t" + p.related + "\n";
  }
  io::write_file(path, out);
}

void write_queries(const std::filesystem::path& path, const std::vector<Query>& queries) {
  std::string out = std::string(kQueriesHeader) + "\n";
  for (const auto& q : queries) out += q.qid + "\t" + q.text + "\n";
  io::write_file(path, out);
}

void attach_query_text(GoldStandard& gold, const std::vector<Query>& queries) {
  for (const auto& q : queries) {
    if (gold.relevant.count(q.qid)) gold.query_text[q.qid] = q.text;
  }
}

RawPairSet concat_pairsets(const std::vector<RawPairSet>& sets) {
  if (sets.empty()) throw ValidationError("concat_pairsets: empty input");
  RawPairSet out;
  out.language = "multi";
  std::size_t total = 0;
  for (const auto& s : sets) total += s.pairs.size();
  out.pairs.reserve(total);
  for (const auto& s : sets) out.pairs.insert(out.pairs.end(), s.pairs.begin(), s.pairs.end());
  return out;
}

MajorGroupIndex::MajorGroupIndex(const std::vector<CorpusEntity>& entities) {
  auto offer = [](std::unordered_map<std::string, std::string>& table, const std::string& label,
                  const std::string& code) {
    auto [it, inserted] = table.emplace(text::fold_key(label), code);
    if (!inserted && code < it->second) it->second = code;
  };
  for (const auto& e : entities) {
    if (e.entity_type != EntityType::occupation || !e.esco_code) continue;
    for (const auto& [lang, labels] : e.labels) {
      offer(preferred_, labels.preferred, *e.esco_code);
      for (const auto& alt : labels.alternatives) offer(alternative_, alt, *e.esco_code);
    }
  }
}

std::optional<std::string> MajorGroupIndex::lookup_code(const std::string& title) const {
  const std::string key = text::fold_key(title);
  if (auto it = preferred_.find(key); it != preferred_.end()) return it->second;
  if (auto it = alternative_.find(key); it != alternative_.end()) return it->second;
  return std::nullopt;
}

std::optional<int> MajorGroupIndex::lookup(const std::string& title) const {
  auto code = lookup_code(title);
  if (!code) return std::nullopt;
  return (*code)[0] - '0';
}

std::optional<int> map_title_to_major_group(const std::string& title,
                                            const std::vector<CorpusEntity>& entities) {
  return MajorGroupIndex(entities).lookup(title);
}

CoverageStats coverage_from_counts(std::size_t total, std::size_t mapped) {
  if (total == 0) throw ValidationError("coverage_stats: empty knowledge base");
  if (mapped > total) throw ValidationError("coverage_stats: mapped exceeds total");
  CoverageStats stats;
  stats.total = total;
  stats.mapped = mapped;
  // Integer arithmetic in tenths of a percent, rounded half-up.
  const std::size_t tenths = (2000 * (total - mapped) + total) / (2 * total);
  stats.unmapped_pct = static_cast<double>(tenths) / 10.0;
  return stats;
}

CoverageStats coverage_stats(const KnowledgeBase& kb, const MajorGroupIndex& index) {
  std::size_t mapped = 0;
  for (const auto& e : kb.entries) {
    if (index.lookup(e.text)) ++mapped;
  }
  return coverage_from_counts(kb.size(), mapped);
}

CoverageStats coverage_stats(const KnowledgeBase& kb, const std::vector<CorpusEntity>& entities) {
  return coverage_stats(kb, MajorGroupIndex(entities));
}

}  // namespace jobmatch
