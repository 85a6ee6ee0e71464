#include "jobmatch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>

#include "jobmatch/error.hpp"
#include "jobmatch/kernels.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

constexpr const char* kDash = "—";

std::size_t display_width(const std::string& s) { return text::utf8_chars(s).size(); }

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  const std::size_t w = display_width(s);
  const std::string fill(width > w ? width - w : 0, ' ');
  return left_align ? s + fill : fill + s;
}

// Renders rows of cells with the first column left-aligned, others right-aligned.
std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += pad(row[c], widths[c], c == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Preferred language order first, then the rest alphabetically.
std::vector<std::string> ordered_languages(const std::map<std::string, double>& by_language) {
  std::vector<std::string> out;
  for (const char* l : {"en", "de", "es", "zh"}) {
    if (by_language.count(l)) out.push_back(l);
  }
  for (const auto& [l, _] : by_language) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::optional<double> macro_average(const std::map<LanguagePair, double>& by_pair,
                                    std::vector<std::string>& warnings) {
  std::vector<double> present;
  for (const char* l : {"en", "es", "de"}) {
    if (auto it = by_pair.find({l, l}); it != by_pair.end()) present.push_back(it->second);
  }
  if (present.empty()) return std::nullopt;
  if (present.size() < 3) {
    warnings.push_back(fmt::format("avg(en,es,de) computed over {} of 3 in-language pairs", present.size()));
  }
  return mean(present);
}

}  // namespace

double average_precision(const RankedList& ranking, const std::set<std::string>& gold) {
  if (gold.empty()) return 0.0;
  std::vector<char> rel(ranking.entries.size());
  for (std::size_t r = 0; r < rel.size(); ++r) rel[r] = gold.count(ranking.entries[r].doc_id) ? 1 : 0;
  const std::size_t g = gold.size();
  double ap = 0.0;
  kernels::average_precisions(std::span(&rel, 1), std::span(&g, 1), std::span(&ap, 1),
                              kernels::Backend::serial);
  return ap;
}

MapResult evaluate_run(const RunFile& run, const GoldStandard& qrels) {
  std::map<std::string, const RankedList*> by_id;
  for (const auto& l : run.lists) by_id.emplace(l.query_id, &l);

  std::vector<std::string> qids;
  std::vector<std::vector<char>> relevant;
  std::vector<std::size_t> gold_sizes;
  MapResult result;
  for (const auto& [qid, gold] : qrels.relevant) {
    if (gold.empty()) continue;
    qids.push_back(qid);
    gold_sizes.push_back(gold.size());
    auto it = by_id.find(qid);
    std::vector<char> rel;
    if (it == by_id.end()) {
      ++result.missing_queries;
      result.warnings.push_back("query '" + qid + "' missing from run; AP = 0");
    } else {
      rel.resize(it->second->entries.size());
      for (std::size_t r = 0; r < rel.size(); ++r) rel[r] = gold.count(it->second->entries[r].doc_id) ? 1 : 0;
    }
    relevant.push_back(std::move(rel));
  }
  if (qids.empty() || result.missing_queries == qids.size()) {
    throw ValidationError("evaluate_run: run '" + run.tag + "' shares no query with the qrels");
  }
  std::vector<double> ap(qids.size());
  kernels::average_precisions(relevant, gold_sizes, ap);
  for (std::size_t i = 0; i < qids.size(); ++i) result.ap_per_query[qids[i]] = ap[i];
  result.map = mean(ap);
  return result;
}

LanguagePair parse_language_pair(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) return {s, s};
  if (dash == 0 || dash + 1 == s.size() || s.find('-', dash + 1) != std::string::npos) {
    throw ValidationError("bad language pair '" + s + "' (expected e.g. en-es)");
  }
  return {s.substr(0, dash), s.substr(dash + 1)};
}

CrossLingualReport crosslingual_report(const std::map<LanguagePair, RunFile>& runs,
                                       const std::map<LanguagePair, GoldStandard>& qrels) {
  CrossLingualReport report;
  for (const auto& [pair, run] : runs) {
    auto q = qrels.find(pair);
    if (q == qrels.end()) {
      report.warnings.push_back("no qrels for " + pair.str() + "; skipped");
      continue;
    }
    MapResult r = evaluate_run(run, q->second);
    report.by_pair[pair] = r.map;
    for (auto& w : r.warnings) report.warnings.push_back(pair.str() + ": " + w);
  }
  report.macro_avg_en_es_de = macro_average(report.by_pair, report.warnings);
  return report;
}

MajorGroupScores major_group_report(const RunFile& run, const GoldStandard& qrels,
                                    const MajorGroupIndex& index) {
  const MapResult r = evaluate_run(run, qrels);
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [qid, ap] : r.ap_per_query) {
    auto text_it = qrels.query_text.find(qid);
    std::optional<int> group;
    if (text_it != qrels.query_text.end()) group = index.lookup(text_it->second);
    groups[group ? std::to_string(*group) : "unmapped"].push_back(ap);
  }
  MajorGroupScores out;
  for (const auto& [key, aps] : groups) out[key] = {mean(aps), aps.size()};
  return out;
}

MajorGroupScores major_group_report(const RunFile& run, const GoldStandard& qrels,
                                    const std::vector<CorpusEntity>& entities) {
  return major_group_report(run, qrels, MajorGroupIndex(entities));
}

double round_half_up(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The small bias keeps values like 0.4915 (stored as 0.49149999...) rounding up.
  return std::floor(x * scale + 0.5 + 1e-9) / scale;
}

std::string format_score(double x, int decimals) { return fmt::format("{:.{}f}", round_half_up(x, decimals), decimals); }

EvalReport build_report(const std::map<LanguagePair, RunFile>& runs,
                        const std::map<LanguagePair, GoldStandard>& qrels) {
  EvalReport report;
  std::vector<double> all;
  for (const auto& [pair, run] : runs) {
    auto q = qrels.find(pair);
    if (q == qrels.end()) {
      report.warnings.push_back("no qrels for " + pair.str() + "; skipped");
      continue;
    }
    MapResult r = evaluate_run(run, q->second);
    const std::string prefix = pair.source == pair.target ? pair.source : pair.str();
    for (const auto& [qid, ap] : r.ap_per_query) {
      report.ap_per_query[prefix + "/" + qid] = ap;
      all.push_back(ap);
    }
    report.by_language_pair[pair] = r.map;
    if (pair.source == pair.target) report.by_language[pair.source] = r.map;
    for (auto& w : r.warnings) report.warnings.push_back(prefix + ": " + w);
  }
  if (all.empty()) throw ValidationError("build_report: nothing to evaluate");
  report.map_overall = mean(all);
  report.macro_avg_en_es_de = macro_average(report.by_language_pair, report.warnings);
  return report;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["map_overall"] = report.map_overall;
  j["by_language"] = nlohmann::ordered_json::object();
  for (const auto& [l, v] : report.by_language) j["by_language"][l] = v;
  j["by_language_pair"] = nlohmann::ordered_json::object();
  for (const auto& [p, v] : report.by_language_pair) j["by_language_pair"][p.str()] = v;
  if (report.macro_avg_en_es_de) {
    j["macro_avg_en_es_de"] = *report.macro_avg_en_es_de;
  } else {
    j["macro_avg_en_es_de"] = nullptr;
  }
  j["by_major_group"] = nlohmann::ordered_json::object();
  for (const auto& [g, s] : report.by_major_group) {
    j["by_major_group"][g] = {{"map", s.map}, {"queries", s.queries}};
  }
  j["coverage"] = nlohmann::ordered_json::object();
  for (const auto& [l, c] : report.coverage) {
    j["coverage"][l] = {{"total", c.total}, {"mapped", c.mapped}, {"unmapped_pct", c.unmapped_pct}};
  }
  j["ap_per_query"] = nlohmann::ordered_json::object();
  for (const auto& [q, v] : report.ap_per_query) j["ap_per_query"][q] = v;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string report_tables(const EvalReport& report, const std::string& run_name) {
  std::string out;
  const auto langs = ordered_languages(report.by_language);
  if (!langs.empty()) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{""};
    std::vector<std::string> row{run_name};
    std::vector<double> vals;
    for (const auto& l : langs) {
      header.push_back(l);
      row.push_back(format_score(report.by_language.at(l)));
      vals.push_back(report.by_language.at(l));
    }
    header.push_back("avg");
    row.push_back(format_score(mean(vals)));
    rows.push_back(header);
    rows.push_back(row);
    out += "MAP by language\n" + render_grid(rows) + "\n";
  }
  {
    std::vector<std::string> header{"", "Avg.(en,es,de)"};
    std::vector<std::string> row{run_name, report.macro_avg_en_es_de ? format_score(*report.macro_avg_en_es_de) : kDash};
    // In-language pairs first; within each group en, es, de, zh lead.
    auto rank = [](const std::string& l) {
      const std::vector<std::string> lead{"en", "es", "de", "zh"};
      return static_cast<std::size_t>(std::find(lead.begin(), lead.end(), l) - lead.begin());
    };
    std::vector<LanguagePair> order;
    for (const auto& [p, _] : report.by_language_pair) order.push_back(p);
    std::stable_sort(order.begin(), order.end(), [&](const LanguagePair& a, const LanguagePair& b) {
      const bool ca = a.source != a.target, cb = b.source != b.target;
      if (ca != cb) return !ca;
      if (rank(a.source) != rank(b.source)) return rank(a.source) < rank(b.source);
      return rank(a.target) < rank(b.target);
    });
    for (const auto& p : order) {
      header.push_back(p.source + "–" + p.target);
      row.push_back(format_score(report.by_language_pair.at(p)));
    }
    out += "MAP by language pair\n" + render_grid({header, row}) + "\n";
  }
  out += "Overall MAP: " + format_score(report.map_overall) + "\n";
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "scope,key,map\n";
  out += fmt::format("overall,all,{:.6f}\n", report.map_overall);
  for (const auto& [l, v] : report.by_language) out += fmt::format("language,{},{:.6f}\n", l, v);
  for (const auto& [p, v] : report.by_language_pair) out += fmt::format("language_pair,{},{:.6f}\n", p.str(), v);
  if (report.macro_avg_en_es_de) out += fmt::format("macro,avg_en_es_de,{:.6f}\n", *report.macro_avg_en_es_de);
  for (const auto& [g, s] : report.by_major_group) out += fmt::format("major_group,{},{:.6f}\n", g, s.map);
  return out;
}

const std::vector<std::string>& major_group_names() {
  static const std::vector<std::string> names = {
      "0 Armed forces occupations",
      "1 Managers",
      "2 Professionals",
      "3 Technicians & assoc. profs.",
      "4 Clerical support workers",
      "5 Service & sales workers",
      "6 Skilled agri./forestry/fishery workers",
      "7 Craft & related trades",
      "8 Plant & machine operators",
      "9 Elementary occupations",
  };
  return names;
}

std::string render_major_group_table(const std::vector<std::pair<std::string, MajorGroupScores>>& columns) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"ESCO major group"};
  for (const auto& [name, _] : columns) header.push_back(name);
  rows.push_back(header);
  auto add_row = [&](const std::string& label, const std::string& key) {
    std::vector<std::string> row{label};
    for (const auto& [_, scores] : columns) {
      auto it = scores.find(key);
      row.push_back(it == scores.end() ? kDash : format_score(it->second.map));
    }
    rows.push_back(row);
  };
  add_row("Unmapped Titles", "unmapped");
  for (int g = 0; g <= 9; ++g) add_row(major_group_names()[g], std::to_string(g));
  return render_grid(rows);
}

std::string render_coverage_table(const std::vector<std::pair<std::string, CoverageStats>>& columns) {
  std::vector<std::string> header{""}, total{"Total corpus titles"}, mapped{"Mapped titles"},
      unmapped{"Unmapped titles (%)"};
  for (const auto& [name, c] : columns) {
    header.push_back(name);
    total.push_back(std::to_string(c.total));
    mapped.push_back(std::to_string(c.mapped));
    unmapped.push_back(fmt::format("{:.1f}%", c.unmapped_pct));
  }
  return render_grid({header, total, mapped, unmapped});
}

}  // namespace jobmatch
