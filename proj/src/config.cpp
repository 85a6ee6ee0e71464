#include "jobmatch/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/text.hpp"

namespace jobmatch {
namespace {

const std::set<std::string>& scalar_keys() {
  static const std::set<std::string> keys = {
      "task", "method", "languages", "seed",
      "paths.entities", "paths.pairs", "paths.links", "paths.output",
      "sampler.neg_ratio", "sampler.per_language", "sampler.seed",
      "encoder.backend", "encoder.hash_dim", "encoder.embed_dim", "encoder.init_scale", "encoder.seed",
      "encoder.external.dir",
      "contrastive.k_negatives", "contrastive.batch_size", "contrastive.learning_rate", "contrastive.epochs",
      "contrastive.seed", "contrastive.symmetric", "contrastive.temperature", "contrastive.dedup",
      "contrastive.heldout_frac",
      "classifier.learning_rate", "classifier.batch_size", "classifier.epochs", "classifier.warmup_frac",
      "classifier.floor_ratio", "classifier.seed", "classifier.train_encoder", "classifier.head_scale",
      "task_a_prompt", "task_b_prompt",
      "rank.top_k", "eval.select_lang",
  };
  return keys;
}

const char* kPathPrefixes[] = {"paths.kb.", "paths.queries.", "paths.qrels."};

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

bool known_key(const std::string& key) {
  if (scalar_keys().count(key)) return true;
  for (const char* p : kPathPrefixes) {
    if (starts_with(key, p) && key.size() > std::string(p).size()) return true;
  }
  return false;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ValidationError("config: " + key + " = '" + value + "' is not " + expected);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : text::split(v, ',')) {
    std::string t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

LanguageSlot parse_slot(const std::string& s) {
  auto dash = s.find('-');
  if (dash == std::string::npos) return {s, s, s};
  std::string src = s.substr(0, dash), tgt = s.substr(dash + 1);
  if (src.empty() || tgt.empty() || tgt.find('-') != std::string::npos) {
    throw ValidationError("config: bad language entry '" + s + "'");
  }
  return {s, src, tgt};
}

void check_value(const std::string& key, const std::string& v) {
  static const std::set<std::string> bools = {"sampler.per_language", "contrastive.symmetric", "contrastive.dedup",
                                              "classifier.train_encoder"};
  static const std::set<std::string> doubles = {
      "sampler.neg_ratio",          "encoder.init_scale",     "contrastive.learning_rate",
      "contrastive.temperature",    "contrastive.heldout_frac", "classifier.learning_rate",
      "classifier.warmup_frac",     "classifier.floor_ratio", "classifier.head_scale"};
  static const std::set<std::string> counts = {
      "seed",         "sampler.seed",         "encoder.hash_dim",       "encoder.embed_dim",
      "encoder.seed", "contrastive.k_negatives", "contrastive.batch_size", "contrastive.epochs",
      "contrastive.seed", "classifier.batch_size", "classifier.epochs", "classifier.seed", "rank.top_k"};
  if (bools.count(key)) to_bool(key, v);
  if (doubles.count(key)) to_double(key, v);
  if (counts.count(key)) to_u64(key, v);
}

}  // namespace

KeyValues parse_key_values(const std::string& content, const std::string& source) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = text::trim(line);
    if (t.empty() || t[0] == '#') {
      if (end == content.size()) break;
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "key", "expected 'key = value'");
    std::string key = text::trim(t.substr(0, eq));
    std::string value = text::trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(source, line_no, "key", "empty key");
    if (!kv.emplace(key, value).second) throw ParseError(source, line_no, "key", "duplicate key '" + key + "'");
    if (end == content.size()) break;
  }
  return kv;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::classify: return "classify";
    case Method::contrastive: return "contrastive";
    case Method::prompt: return "prompt";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "classify") return Method::classify;
  if (s == "contrastive") return Method::contrastive;
  if (s == "prompt") return Method::prompt;
  throw ValidationError("unknown method '" + s + "' (expected classify, contrastive or prompt)");
}

std::vector<std::string> PipelineConfig::plain_languages() const {
  std::vector<std::string> out;
  for (const auto& slot : languages) {
    for (const auto& l : {slot.source, slot.target}) {
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
  }
  return out;
}

std::filesystem::path PipelineConfig::kb_path(const LanguageSlot& slot) const { return kb.at(slot.target); }
std::filesystem::path PipelineConfig::queries_path(const LanguageSlot& slot) const {
  return queries.at(slot.source);
}
std::filesystem::path PipelineConfig::qrels_path(const LanguageSlot& slot) const { return qrels.at(slot.name); }

std::string PipelineConfig::run_tag() const { return to_string(method) + "-task" + to_string(task); }

std::string PipelineConfig::snapshot() const {
  std::string out;
  for (const auto& [k, v] : raw) out += k + "=" + v + "\n";
  return out;
}

PipelineConfig make_config(const KeyValues& kv, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  c.raw = kv;
  c.base_dir = base_dir;
  for (const auto& [key, value] : kv) {
    if (starts_with(key, "grid.")) {
      const std::string target = key.substr(5);
      if (!scalar_keys().count(target) || starts_with(target, "paths.") || target == "task" ||
          target == "method" || target == "languages") {
        throw ValidationError("config: '" + target + "' cannot be searched over");
      }
      auto values = split_list(value);
      if (values.empty()) throw ValidationError("config: " + key + " has no values");
      c.grid[target] = values;
      continue;
    }
    if (!known_key(key)) throw ValidationError("config: unknown key '" + key + "'");
  }

  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };

  if (auto v = get("task")) c.task = parse_task(*v);
  if (auto v = get("method")) c.method = parse_method(*v);
  if (auto v = get("seed")) c.seed = to_u64("seed", *v);
  c.sampler.seed = c.encoder.seed = c.contrastive.seed = c.classifier.seed = c.seed;

  if (auto v = get("languages")) {
    for (const auto& s : split_list(*v)) c.languages.push_back(parse_slot(s));
  }
  if (c.languages.empty()) throw ValidationError("config: languages must list at least one language");

  if (auto v = get("paths.entities")) c.entities = path(*v);
  if (auto v = get("paths.pairs")) c.pairs = path(*v);
  if (auto v = get("paths.links")) c.links = path(*v);
  if (auto v = get("paths.output")) c.output = path(*v);
  for (const auto& [key, value] : kv) {
    if (starts_with(key, "paths.kb.")) c.kb[key.substr(9)] = path(value);
    if (starts_with(key, "paths.queries.")) c.queries[key.substr(14)] = path(value);
    if (starts_with(key, "paths.qrels.")) c.qrels[key.substr(12)] = path(value);
  }

  if (auto v = get("sampler.neg_ratio")) c.sampler.neg_ratio = to_double("sampler.neg_ratio", *v);
  if (auto v = get("sampler.per_language")) c.per_language = to_bool("sampler.per_language", *v);
  if (auto v = get("sampler.seed")) c.sampler.seed = to_u64("sampler.seed", *v);

  if (auto v = get("encoder.backend")) {
    if (*v == "toy") {
      c.encoder.backend = EncoderBackend::toy;
    } else if (*v == "external") {
      c.encoder.backend = EncoderBackend::external;
    } else {
      bad_value("encoder.backend", *v, "toy or external");
    }
  }
  if (auto v = get("encoder.hash_dim")) c.encoder.hash_dim = to_u64("encoder.hash_dim", *v);
  if (auto v = get("encoder.embed_dim")) c.encoder.embed_dim = to_u64("encoder.embed_dim", *v);
  if (auto v = get("encoder.init_scale")) c.encoder.init_scale = to_double("encoder.init_scale", *v);
  if (auto v = get("encoder.seed")) c.encoder.seed = to_u64("encoder.seed", *v);
  if (auto v = get("encoder.external.dir")) c.encoder.external_dir = path(*v);

  auto& ct = c.contrastive;
  if (auto v = get("contrastive.k_negatives")) ct.k_negatives = to_u64("contrastive.k_negatives", *v);
  if (auto v = get("contrastive.batch_size")) ct.batch_size = to_u64("contrastive.batch_size", *v);
  if (auto v = get("contrastive.learning_rate")) ct.learning_rate = to_double("contrastive.learning_rate", *v);
  if (auto v = get("contrastive.epochs")) ct.epochs = to_u64("contrastive.epochs", *v);
  if (auto v = get("contrastive.seed")) ct.seed = to_u64("contrastive.seed", *v);
  if (auto v = get("contrastive.symmetric")) ct.symmetric = to_bool("contrastive.symmetric", *v);
  if (auto v = get("contrastive.temperature")) ct.temperature = to_double("contrastive.temperature", *v);
  if (auto v = get("contrastive.dedup")) ct.dedup = to_bool("contrastive.dedup", *v);
  if (auto v = get("contrastive.heldout_frac")) ct.heldout_frac = to_double("contrastive.heldout_frac", *v);

  auto& cl = c.classifier;
  if (auto v = get("classifier.learning_rate")) cl.learning_rate = to_double("classifier.learning_rate", *v);
  if (auto v = get("classifier.batch_size")) cl.batch_size = to_u64("classifier.batch_size", *v);
  if (auto v = get("classifier.epochs")) cl.epochs = to_u64("classifier.epochs", *v);
  if (auto v = get("classifier.warmup_frac")) cl.warmup_frac = to_double("classifier.warmup_frac", *v);
  if (auto v = get("classifier.floor_ratio")) cl.floor_ratio = to_double("classifier.floor_ratio", *v);
  if (auto v = get("classifier.seed")) cl.seed = to_u64("classifier.seed", *v);
  if (auto v = get("classifier.train_encoder")) cl.train_encoder = to_bool("classifier.train_encoder", *v);
  if (auto v = get("classifier.head_scale")) c.head_scale = to_double("classifier.head_scale", *v);

  if (auto v = get("task_a_prompt")) c.task_a_prompt = {*v};
  if (auto v = get("task_b_prompt")) c.task_b_prompt = {*v};
  if (auto v = get("rank.top_k")) {
    c.top_k = to_u64("rank.top_k", *v);
    if (*c.top_k == 0) throw ValidationError("config: rank.top_k must be positive");
  }
  if (auto v = get("eval.select_lang")) c.select_lang = *v;

  // Validation that does not touch the filesystem.
  if (c.output.empty()) throw ValidationError("config: paths.output is required");
  for (const auto& slot : c.languages) {
    if (!c.kb.count(slot.target)) throw ValidationError("config: paths.kb." + slot.target + " is required");
    if (!c.queries.count(slot.source)) {
      throw ValidationError("config: paths.queries." + slot.source + " is required");
    }
    if (!c.qrels.count(slot.name)) throw ValidationError("config: paths.qrels." + slot.name + " is required");
  }
  if (c.sampler.neg_ratio <= 0.0) throw ValidationError("config: sampler.neg_ratio must be positive");
  if (c.encoder.hash_dim == 0 || c.encoder.embed_dim == 0) {
    throw ValidationError("config: encoder dimensions must be positive");
  }
  if (c.encoder.init_scale <= 0.0) throw ValidationError("config: encoder.init_scale must be positive");
  if (c.head_scale <= 0.0) throw ValidationError("config: classifier.head_scale must be positive");
  switch (c.method) {
    case Method::contrastive:
      c.contrastive.validate();
      if (c.encoder.backend == EncoderBackend::toy && c.entities.empty()) {
        throw ValidationError("config: contrastive training needs paths.entities");
      }
      if (c.task == Task::B && c.encoder.backend == EncoderBackend::toy && !c.links && c.pairs.empty()) {
        throw ValidationError("config: Task B contrastive training needs paths.links or paths.pairs");
      }
      break;
    case Method::classify:
      c.classifier.validate();
      if (c.pairs.empty()) throw ValidationError("config: classification needs paths.pairs");
      if (c.encoder.backend == EncoderBackend::external) {
        throw ValidationError("config: the pair classifier needs the toy encoder backend");
      }
      break;
    case Method::prompt:
      break;
  }
  if (c.encoder.backend == EncoderBackend::external && c.encoder.external_dir.empty()) {
    throw ValidationError("config: encoder.external.dir is required for the external backend");
  }
  // Grid values are type-checked up front; invalid combinations fail per cell.
  for (const auto& [key, values] : c.grid) {
    for (const auto& v : values) check_value(key, v);
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  auto kv = parse_key_values(io::read_file(path), path.string());
  return make_config(kv, std::filesystem::absolute(path).parent_path());
}

PipelineConfig with_overrides(const PipelineConfig& cfg, const KeyValues& overrides) {
  KeyValues kv = cfg.raw;
  for (const auto& [k, v] : overrides) kv[k] = v;
  return make_config(kv, cfg.base_dir);
}

}  // namespace jobmatch
