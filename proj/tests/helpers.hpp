#pragma once

#include <filesystem>
#include <string>

#include "jobmatch/io.hpp"

namespace testing {

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("jobmatch_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write(const std::filesystem::path& dir, const std::string& name,
                                   const std::string& content) {
  auto p = dir / name;
  jobmatch::io::write_file(p, content);
  return p;
}

}  // namespace testing
