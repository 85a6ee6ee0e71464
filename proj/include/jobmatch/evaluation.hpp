#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jobmatch/corpus.hpp"
#include "jobmatch/ranking.hpp"

namespace jobmatch {

// (1/|gold|) * sum over ranks r holding a gold doc of precision@r. Gold docs
// missing from the ranking contribute 0. Empty gold gives 0.
double average_precision(const RankedList& ranking, const std::set<std::string>& gold);

struct MapResult {
  double map = 0.0;
  std::map<std::string, double> ap_per_query;
  std::size_t missing_queries = 0;
  std::vector<std::string> warnings;
};

// MAP over the judged queries. A judged query absent from the run scores 0
// with a warning; unjudged run queries are ignored. Throws if no judged query
// appears in the run.
MapResult evaluate_run(const RunFile& run, const GoldStandard& qrels);

// Source/target language pair, e.g. {"en", "es"}.
struct LanguagePair {
  std::string source;
  std::string target;

  auto operator<=>(const LanguagePair&) const = default;
  std::string str() const { return source + "-" + target; }
};

LanguagePair parse_language_pair(const std::string& s);

struct CrossLingualReport {
  std::map<LanguagePair, double> by_pair;
  // Mean of the en-en, es-es and de-de MAPs that are present.
  std::optional<double> macro_avg_en_es_de;
  std::vector<std::string> warnings;
};

CrossLingualReport crosslingual_report(const std::map<LanguagePair, RunFile>& runs,
                                       const std::map<LanguagePair, GoldStandard>& qrels);

struct GroupScore {
  double map = 0.0;
  std::size_t queries = 0;
};

// Keys: "unmapped" and "0".."9"; groups without queries are absent.
using MajorGroupScores = std::map<std::string, GroupScore>;

// Groups judged queries by the ESCO major group of their query text and
// averages AP within each group. Query text comes from qrels.query_text.
MajorGroupScores major_group_report(const RunFile& run, const GoldStandard& qrels,
                                    const MajorGroupIndex& index);
MajorGroupScores major_group_report(const RunFile& run, const GoldStandard& qrels,
                                    const std::vector<CorpusEntity>& entities);

// Half-up rounding to a fixed number of decimals.
double round_half_up(double x, int decimals);
std::string format_score(double x, int decimals = 3);

struct EvalReport {
  double map_overall = 0.0;
  std::map<std::string, double> ap_per_query;  // keyed "<lang>/<qid>"
  std::map<std::string, double> by_language;
  std::map<LanguagePair, double> by_language_pair;
  MajorGroupScores by_major_group;
  std::optional<double> macro_avg_en_es_de;
  std::map<std::string, CoverageStats> coverage;  // by language
  std::vector<std::string> warnings;
};

// One evaluated run per language pair; pairs with source == target also fill
// by_language. map_overall is the mean AP over every evaluated query.
EvalReport build_report(const std::map<LanguagePair, RunFile>& runs,
                        const std::map<LanguagePair, GoldStandard>& qrels);

std::string report_json(const EvalReport& report);
// Aligned text: per-language table, then cross-lingual table.
std::string report_tables(const EvalReport& report, const std::string& run_name);
std::string report_csv(const EvalReport& report);

const std::vector<std::string>& major_group_names();

// Major-group MAP table: one row per group ("Unmapped Titles", 0..9), one
// column per named run. Missing cells render as an em dash.
std::string render_major_group_table(const std::vector<std::pair<std::string, MajorGroupScores>>& columns);

// Coverage table with one column per language.
std::string render_coverage_table(const std::vector<std::pair<std::string, CoverageStats>>& columns);

}  // namespace jobmatch
