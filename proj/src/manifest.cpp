#include "jobmatch/manifest.hpp"

#include <nlohmann/json.hpp>

#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"

namespace jobmatch {

std::string manifest_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["stage"] = m.stage;
  j["seed"] = m.seed;
  j["wall_seconds"] = m.wall_seconds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["warnings"] = m.warnings;
  j["config"] = m.config_snapshot;
  return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& json, const std::string& source) {
  try {
    auto j = nlohmann::json::parse(json);
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.config_snapshot = j.at("config").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": malformed manifest: " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) { io::write_file(path, manifest_json(m)); }

std::optional<Manifest> read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  return parse_manifest(io::read_file(path), path.string());
}

std::map<std::string, std::string> hash_files(const std::vector<std::filesystem::path>& files) {
  std::map<std::string, std::string> out;
  for (const auto& f : files) out[f.string()] = io::sha256_file(f);
  return out;
}

std::vector<std::string> changed_files(const std::map<std::string, std::string>& recorded,
                                       const std::vector<std::filesystem::path>& files) {
  std::vector<std::string> out;
  for (const auto& f : files) {
    auto it = recorded.find(f.string());
    if (it == recorded.end()) continue;
    if (!std::filesystem::exists(f) || io::sha256_file(f) != it->second) out.push_back(f.string());
  }
  return out;
}

}  // namespace jobmatch
