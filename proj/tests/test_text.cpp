#include "doctest.h"

#include "jobmatch/error.hpp"
#include "jobmatch/text.hpp"

using namespace jobmatch;

TEST_CASE("trim strips ASCII and Unicode spaces") {
  CHECK(text::trim("  cider maker\t") == "cider maker");
  CHECK(text::trim(" chef　") == "chef");
  CHECK(text::trim("   ") == "");
}

TEST_CASE("nfc composes decomposed sequences") {
  const std::string decomposed = "técnico";  // e + combining acute
  CHECK(text::nfc(decomposed) == "técnico");
  CHECK(text::normalize("  técnico ") == "técnico");
}

TEST_CASE("fold_key equates case and normalization variants") {
  CHECK(text::fold_key("Cider Maker") == text::fold_key("cider maker"));
  CHECK(text::fold_key("TÉCNICO") == text::fold_key("técnico"));
  CHECK(text::fold_key("Straße") == text::fold_key("STRASSE"));
  CHECK(text::fold_key("baker") != text::fold_key("bakery"));
}

TEST_CASE("invalid UTF-8 is rejected") {
  CHECK_THROWS_AS(text::nfc(std::string("bad \xff byte")), ValidationError);
  CHECK_THROWS_AS(text::fold_key(std::string("\xc3")), ValidationError);
  // A literal replacement character is valid input.
  CHECK(text::nfc("�") == "�");
}

TEST_CASE("utf8_chars splits on code points") {
  auto cs = text::utf8_chars("aé中");
  REQUIRE(cs.size() == 3);
  CHECK(cs[0] == "a");
  CHECK(cs[1] == "é");
  CHECK(cs[2] == "中");
}

TEST_CASE("split keeps empty fields") {
  auto f = text::split("a\t\tb\t", '\t');
  REQUIRE(f.size() == 4);
  CHECK(f[1].empty());
  CHECK(f[3].empty());
}
