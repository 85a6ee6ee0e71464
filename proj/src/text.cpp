#include "jobmatch/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "jobmatch/error.hpp"

namespace jobmatch::text {
namespace {

icu::UnicodeString to_unicode(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), s.size()));
  if (u.indexOf(static_cast<UChar>(0xFFFD)) >= 0 &&
      s.find("\xEF\xBF\xBD") == std::string_view::npos) {
    throw ValidationError("invalid UTF-8 in text: " + std::string(s.substr(0, 40)));
  }
  return u;
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

const icu::Normalizer2& nfc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString trim_unicode(const icu::UnicodeString& u) {
  int32_t begin = 0;
  int32_t end = u.length();
  while (begin < end && u_isUWhiteSpace(u.char32At(begin))) begin = u.moveIndex32(begin, 1);
  while (end > begin) {
    int32_t prev = u.moveIndex32(end, -1);
    if (!u_isUWhiteSpace(u.char32At(prev))) break;
    end = prev;
  }
  return icu::UnicodeString(u, begin, end - begin);
}

icu::UnicodeString normalize_unicode(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(trim_unicode(to_unicode(s)), status);
  if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
  return out;
}

}  // namespace

std::string trim(std::string_view s) { return to_utf8(trim_unicode(to_unicode(s))); }

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(to_unicode(s), status);
  if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
  return to_utf8(out);
}

std::string normalize(std::string_view s) { return to_utf8(normalize_unicode(s)); }

std::string fold_key(std::string_view s) {
  icu::UnicodeString u = normalize_unicode(s);
  u.foldCase(U_FOLD_CASE_DEFAULT);
  // Case folding can denormalize (e.g. U+0130), so renormalize.
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(u, status);
  if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
  return to_utf8(out);
}

std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace jobmatch::text
