#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jobmatch/classifier.hpp"
#include "jobmatch/corpus.hpp"
#include "jobmatch/embedding.hpp"

namespace jobmatch {

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  bool operator==(const RankedList&) const = default;
};

struct RunFile {
  std::string tag;
  std::vector<RankedList> lists;

  const RankedList* find(const std::string& query_id) const;
  bool operator==(const RunFile&) const = default;
};

struct RankOptions {
  std::string tag = "jobmatch";
  // Truncate each list after top_k entries. Full rankings by default; a
  // truncated run can lose gold documents and lower MAP.
  std::optional<std::size_t> top_k;
};

// Sorts by score descending, ties by doc_id ascending, and assigns ranks.
RankedList make_ranked_list(const std::string& query_id, const std::vector<std::string>& doc_ids,
                            std::vector<double> scores, std::optional<std::size_t> top_k = std::nullopt);

// Ranks kb rows for each query row of a precomputed similarity matrix.
RunFile rank_from_scores(const std::vector<std::string>& query_ids, const std::vector<std::string>& doc_ids,
                         const DenseMatrix& scores, const RankOptions& options = {});

// Bi-encoder ranking with precomputed embeddings (toy or external backend).
RunFile rank_by_embeddings(const EmbeddingMatrix& queries, const EmbeddingMatrix& kb,
                           const RankOptions& options = {});

// Queries are embedded with the prompt prefix (if any), candidates without.
RunFile rank_by_embedding(const std::vector<Query>& queries, const KnowledgeBase& kb,
                          const ToyEncoderParams& encoder, const std::optional<PromptTemplate>& prompt,
                          const RankOptions& options = {});

// Scores every (query, candidate) pair with the pair classifier's positive
// softmax probability. Ties between equal probabilities are resolved by the
// logit margin before doc_id.
RunFile rank_by_classifier(const std::vector<Query>& queries, const KnowledgeBase& kb,
                           const PairScorerParams& params, const RankOptions& options = {});

// TREC format: "qid Q0 docid rank score tag", scores with 6 decimals.
std::string format_run(const RunFile& run);
void write_run(const std::filesystem::path& path, const RunFile& run);
// Validates contiguous ranks from 1, non-increasing scores, a single tag and
// unique doc ids per query; errors carry the line number.
RunFile read_run(const std::filesystem::path& path);

}  // namespace jobmatch
