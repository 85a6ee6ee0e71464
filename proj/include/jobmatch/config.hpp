#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jobmatch/classifier.hpp"
#include "jobmatch/contrastive.hpp"
#include "jobmatch/embedding.hpp"
#include "jobmatch/pairs.hpp"

namespace jobmatch {

// Raw "key = value" entries. Lines starting with '#' are comments.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& source);

enum class Method { classify, contrastive, prompt };

std::string to_string(Method m);
Method parse_method(const std::string& s);

enum class EncoderBackend { toy, external };

struct EncoderConfig {
  EncoderBackend backend = EncoderBackend::toy;
  std::size_t hash_dim = 4096;
  std::size_t embed_dim = 64;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  // external: <dir>/<lang>/queries.json and <dir>/<lang>/kb.json sidecars.
  std::filesystem::path external_dir;
};

// An evaluation slot: "en" or a cross-lingual pair such as "en-es".
struct LanguageSlot {
  std::string name;
  std::string source;  // query language
  std::string target;  // knowledge-base language

  bool cross() const { return source != target; }
};

struct PipelineConfig {
  Task task = Task::A;
  Method method = Method::contrastive;
  std::vector<LanguageSlot> languages;
  std::uint64_t seed = 0;

  std::filesystem::path entities;
  std::filesystem::path pairs;
  std::optional<std::filesystem::path> links;
  std::filesystem::path output;
  std::map<std::string, std::filesystem::path> kb;       // by language
  std::map<std::string, std::filesystem::path> queries;  // by language
  std::map<std::string, std::filesystem::path> qrels;    // by slot name

  SamplerConfig sampler;
  bool per_language = true;
  EncoderConfig encoder;
  ContrastiveConfig contrastive;
  ClassifierConfig classifier;
  double head_scale = 0.01;
  PromptTemplate task_a_prompt = PromptTemplate::task_a();
  PromptTemplate task_b_prompt = PromptTemplate::task_b();

  std::optional<std::size_t> top_k;
  std::string select_lang = "en";
  std::map<std::string, std::vector<std::string>> grid;  // key -> candidate values

  KeyValues raw;  // effective entries, paths as written
  std::filesystem::path base_dir;

  // Distinct plain languages, in slot order (training languages).
  std::vector<std::string> plain_languages() const;
  const PromptTemplate& prompt() const { return task == Task::A ? task_a_prompt : task_b_prompt; }
  std::filesystem::path kb_path(const LanguageSlot& slot) const;
  std::filesystem::path queries_path(const LanguageSlot& slot) const;
  std::filesystem::path qrels_path(const LanguageSlot& slot) const;
  // "method-taskX", used as the run tag.
  std::string run_tag() const;
  // Sorted key=value lines of the effective entries.
  std::string snapshot() const;
};

// Builds and validates a configuration. Unknown keys and method-specific
// errors are reported before any work starts. Relative paths resolve against
// base_dir.
PipelineConfig make_config(const KeyValues& kv, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Returns a copy with the given entries replaced, revalidated.
PipelineConfig with_overrides(const PipelineConfig& cfg, const KeyValues& overrides);

}  // namespace jobmatch
