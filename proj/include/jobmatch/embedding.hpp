#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace jobmatch {

// n x d row-major matrix of embeddings with one id per row.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  bool normalized = false;
  std::vector<double> values;

  std::size_t rows() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }

  // Throws ValidationError if sizes disagree, entries are non-finite, or a
  // row of a normalized matrix is off unit length by more than 1e-6.
  void validate() const;
  void normalize_rows();
};

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// Hashed character n-gram features of one text: (bucket, count), sorted by bucket.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> entries;
};

// Trainable toy encoder: hashed character 2- and 3-grams projected to
// embed_dim through a hash_dim x embed_dim matrix.
struct ToyEncoderParams {
  std::size_t hash_dim = 4096;
  std::size_t embed_dim = 64;
  std::uint64_t seed = 0;
  std::vector<double> projection;  // row-major, hash_dim x embed_dim

  // Projection entries drawn from N(0, scale^2).
  static ToyEncoderParams init(std::size_t hash_dim, std::size_t embed_dim, std::uint64_t seed,
                               double scale = 1.0);
  void validate() const;
  std::size_t parameter_count() const { return hash_dim * embed_dim; }

  bool operator==(const ToyEncoderParams&) const = default;
};

struct PromptTemplate {
  std::string text;

  static PromptTemplate task_a() { return {"Given a job title, find the most relevant job titles."}; }
  static PromptTemplate task_b() { return {"Given a job title, find the most relevant skills."}; }
};

// The string that actually gets featurized: prefix + " " + text, or the
// prefix alone when text is empty.
std::string apply_prompt(const std::optional<PromptTemplate>& prompt, const std::string& text);

SparseFeatures featurize(const std::string& text, std::size_t hash_dim);
std::vector<double> project(const SparseFeatures& features, const ToyEncoderParams& params);

struct EncodeStats {
  std::size_t texts = 0;
  std::size_t empty_texts = 0;
};

// Row i is the embedding of texts[i]; ids default to the row index.
EmbeddingMatrix encode(const std::vector<std::string>& texts, const ToyEncoderParams& params,
                       const std::optional<PromptTemplate>& prompt, bool normalize,
                       EncodeStats* stats = nullptr);
EmbeddingMatrix encode(const std::vector<std::string>& ids, const std::vector<std::string>& texts,
                       const ToyEncoderParams& params, const std::optional<PromptTemplate>& prompt,
                       bool normalize, EncodeStats* stats = nullptr);

// u.v / (|u||v|), clamped to [-1, 1]. Throws Error("undefined similarity")
// if either vector is zero.
double cosine(std::span<const double> u, std::span<const double> v);

// Entry (i, j) = cosine(U_i, V_j).
DenseMatrix similarity_matrix(const EmbeddingMatrix& u, const EmbeddingMatrix& v);

// Writes <dir>/<stem>.f32 (little-endian float32, row-major),
// <dir>/<stem>.json ({count, dim, normalized, ids_file}) and the ids file.
// Returns the sidecar path.
std::filesystem::path export_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& dir,
                                        const std::string& stem = "embeddings");
EmbeddingMatrix import_embeddings(const std::filesystem::path& meta_path,
                                  const std::filesystem::path& blob_path);
// Blob path taken as the sidecar path with extension .f32.
EmbeddingMatrix import_embeddings(const std::filesystem::path& meta_path);

}  // namespace jobmatch
