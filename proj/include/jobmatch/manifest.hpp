#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jobmatch {

// Provenance record written next to each stage's artifacts.
struct Manifest {
  std::string stage;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::string config_snapshot;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

std::string manifest_json(const Manifest& m);
Manifest parse_manifest(const std::string& json, const std::string& source);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
std::optional<Manifest> read_manifest(const std::filesystem::path& path);

std::map<std::string, std::string> hash_files(const std::vector<std::filesystem::path>& files);

// Files recorded in `recorded` whose current content hash differs (or that
// are gone). Paths absent from `recorded` are ignored.
std::vector<std::string> changed_files(const std::map<std::string, std::string>& recorded,
                                       const std::vector<std::filesystem::path>& files);

}  // namespace jobmatch
