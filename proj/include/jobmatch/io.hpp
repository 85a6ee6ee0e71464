#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace jobmatch::io {

// Reads a text file as lines, dropping a trailing '\r' from each.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Writes the file, creating parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view content);

// Hex SHA-256 of the file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256(std::string_view data);

}  // namespace jobmatch::io
