#include "jobmatch/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"

namespace jobmatch {
namespace {

RankedList build_list(const std::string& query_id, const std::vector<std::string>& doc_ids,
                      const double* primary, const double* secondary, std::optional<std::size_t> top_k) {
  std::vector<std::size_t> order(doc_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (primary[a] != primary[b]) return primary[a] > primary[b];
    if (secondary && secondary[a] != secondary[b]) return secondary[a] > secondary[b];
    return doc_ids[a] < doc_ids[b];
  });
  const std::size_t keep = top_k ? std::min(*top_k, order.size()) : order.size();
  RankedList list;
  list.query_id = query_id;
  list.entries.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    list.entries.push_back({doc_ids[order[r]], primary[order[r]], r + 1});
  }
  return list;
}

std::vector<std::string> doc_ids_of(const KnowledgeBase& kb) {
  std::vector<std::string> ids;
  ids.reserve(kb.size());
  for (const auto& e : kb.entries) ids.push_back(e.doc_id);
  return ids;
}

std::vector<std::string> doc_texts_of(const KnowledgeBase& kb) {
  std::vector<std::string> texts;
  texts.reserve(kb.size());
  for (const auto& e : kb.entries) texts.push_back(e.text);
  return texts;
}

void check_unique_queries(const std::vector<std::string>& ids) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate query id '" + id + "'");
  }
}

}  // namespace

const RankedList* RunFile::find(const std::string& query_id) const {
  for (const auto& l : lists) {
    if (l.query_id == query_id) return &l;
  }
  return nullptr;
}

RankedList make_ranked_list(const std::string& query_id, const std::vector<std::string>& doc_ids,
                            std::vector<double> scores, std::optional<std::size_t> top_k) {
  if (scores.size() != doc_ids.size()) throw ValidationError("make_ranked_list: one score per doc required");
  return build_list(query_id, doc_ids, scores.data(), nullptr, top_k);
}

RunFile rank_from_scores(const std::vector<std::string>& query_ids, const std::vector<std::string>& doc_ids,
                         const DenseMatrix& scores, const RankOptions& options) {
  if (scores.rows != query_ids.size() || scores.cols != doc_ids.size()) {
    throw ValidationError("rank_from_scores: score matrix shape does not match ids");
  }
  if (doc_ids.empty()) throw ValidationError("rank: knowledge base is empty");
  check_unique_queries(query_ids);
  RunFile run;
  run.tag = options.tag;
  run.lists.resize(query_ids.size());
  const long n = static_cast<long>(query_ids.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long q = 0; q < n; ++q) {
    run.lists[q] = build_list(query_ids[q], doc_ids, scores.values.data() + q * scores.cols, nullptr,
                              options.top_k);
  }
  return run;
}

RunFile rank_by_embeddings(const EmbeddingMatrix& queries, const EmbeddingMatrix& kb,
                           const RankOptions& options) {
  return rank_from_scores(queries.ids, kb.ids, similarity_matrix(queries, kb), options);
}

RunFile rank_by_embedding(const std::vector<Query>& queries, const KnowledgeBase& kb,
                          const ToyEncoderParams& encoder, const std::optional<PromptTemplate>& prompt,
                          const RankOptions& options) {
  if (kb.entries.empty()) throw ValidationError("rank_by_embedding: knowledge base is empty");
  if (queries.empty()) throw ValidationError("rank_by_embedding: no queries");
  std::vector<std::string> qids, qtexts;
  for (const auto& q : queries) {
    qids.push_back(q.qid);
    qtexts.push_back(q.text);
  }
  EmbeddingMatrix qm, km;
  try {
    qm = encode(qids, qtexts, encoder, prompt, true);
  } catch (const Error& e) {
    throw Error(std::string("encoding queries: ") + e.what());
  }
  km = encode(doc_ids_of(kb), doc_texts_of(kb), encoder, std::nullopt, true);
  return rank_by_embeddings(qm, km, options);
}

RunFile rank_by_classifier(const std::vector<Query>& queries, const KnowledgeBase& kb,
                           const PairScorerParams& params, const RankOptions& options) {
  if (kb.entries.empty()) throw ValidationError("rank_by_classifier: knowledge base is empty");
  std::vector<std::string> qids, qtexts;
  for (const auto& q : queries) {
    qids.push_back(q.qid);
    qtexts.push_back(q.text);
  }
  check_unique_queries(qids);
  const auto ids = doc_ids_of(kb);
  const auto qm = encode(qids, qtexts, params.encoder, std::nullopt, true);
  const auto km = encode(ids, doc_texts_of(kb), params.encoder, std::nullopt, true);

  RunFile run;
  run.tag = options.tag;
  run.lists.resize(queries.size());
  const long n = static_cast<long>(queries.size());
  const std::size_t m = ids.size();
#pragma omp parallel for schedule(dynamic, 1)
  for (long q = 0; q < n; ++q) {
    std::vector<double> prob(m), margin(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Logits z = head_logits(qm.row(q), km.row(j), params);
      prob[j] = positive_probability(z);
      margin[j] = z[1] - z[0];
    }
    run.lists[q] = build_list(qids[q], ids, prob.data(), margin.data(), options.top_k);
  }
  return run;
}

std::string format_run(const RunFile& run) {
  std::string out;
  for (const auto& list : run.lists) {
    for (const auto& e : list.entries) {
      out += fmt::format("{} Q0 {} {} {:.6f} {}\n", list.query_id, e.doc_id, e.rank, e.score, run.tag);
    }
  }
  return out;
}

void write_run(const std::filesystem::path& path, const RunFile& run) {
  io::write_file(path, format_run(run));
}

RunFile read_run(const std::filesystem::path& path) {
  const std::string file = path.string();
  const auto lines = io::read_lines(path);
  RunFile run;
  std::unordered_set<std::string> finished;
  std::unordered_set<std::string> docs;
  bool have_tag = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::istringstream ss(lines[i]);
    std::vector<std::string> f;
    for (std::string tok; ss >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    if (f.size() != 6) throw ParseError(file, line_no, "<row>", "expected 'qid Q0 docid rank score tag'");
    std::size_t rank = 0;
    double score = 0.0;
    try {
      std::size_t used = 0;
      rank = std::stoul(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("rank");
    } catch (const std::exception&) {
      throw ParseError(file, line_no, "rank", "not an integer: '" + f[3] + "'");
    }
    try {
      std::size_t used = 0;
      score = std::stod(f[4], &used);
      if (used != f[4].size() || !std::isfinite(score)) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw ParseError(file, line_no, "score", "not a finite number: '" + f[4] + "'");
    }
    if (!have_tag) {
      run.tag = f[5];
      have_tag = true;
    } else if (f[5] != run.tag) {
      throw ParseError(file, line_no, "tag", "run tag '" + f[5] + "' differs from '" + run.tag + "'");
    }
    if (run.lists.empty() || run.lists.back().query_id != f[0]) {
      if (!run.lists.empty()) finished.insert(run.lists.back().query_id);
      if (finished.count(f[0])) {
        throw ParseError(file, line_no, "qid", "query '" + f[0] + "' is not contiguous");
      }
      run.lists.push_back({f[0], {}});
      docs.clear();
    }
    RankedList& list = run.lists.back();
    const std::size_t expected = list.entries.size() + 1;
    if (rank != expected) {
      throw ParseError(file, line_no, "rank",
                       "expected rank " + std::to_string(expected) + ", got " + std::to_string(rank));
    }
    if (!list.entries.empty() && score > list.entries.back().score) {
      throw ParseError(file, line_no, "score", "scores must be non-increasing within a query");
    }
    if (!docs.insert(f[2]).second) {
      throw ParseError(file, line_no, "docid", "duplicate doc '" + f[2] + "' for query '" + f[0] + "'");
    }
    list.entries.push_back({f[2], score, rank});
  }
  return run;
}

}  // namespace jobmatch
