#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace jobmatch::text {

// Strips ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view s);

// Unicode NFC. Throws ValidationError on invalid UTF-8.
std::string nfc(std::string_view s);

// trim + NFC. Applied to every text field on load.
std::string normalize(std::string_view s);

// trim + NFC + full Unicode case folding. Used as the comparison key for
// label matching and duplicate detection.
std::string fold_key(std::string_view s);

// Splits a UTF-8 string into code points, each returned as its byte sequence.
std::vector<std::string_view> utf8_chars(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace jobmatch::text
