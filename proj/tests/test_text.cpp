#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cnorm/error.hpp"
#include "cnorm/text.hpp"

using namespace cnorm;
using Tokens = std::vector<std::string>;

TEST(Tokenize, SpaceDelimited) {
  EXPECT_EQ(tokenize("the boat floats."), (Tokens{"the", "boat", "floats"}));
  EXPECT_EQ(tokenize("Water boils at 100 degrees!"), (Tokens{"Water", "boils", "at", "100", "degrees"}));
  EXPECT_EQ(tokenize("sun,moon;earth"), (Tokens{"sun", "moon", "earth"}));
}

TEST(Tokenize, LongestMatchWithDictionary) {
  Dictionary d({"水", "沸腾", "了"});
  EXPECT_EQ(tokenize("水沸腾了", d), (Tokens{"水", "沸腾", "了"}));
}

TEST(Tokenize, SingleCharacterFallback) { EXPECT_EQ(tokenize("水沸腾"), (Tokens{"水", "沸", "腾"})); }

TEST(Tokenize, GreedyPrefersLongest) {
  Dictionary d({"太阳", "太阳系", "系统"});
  EXPECT_EQ(tokenize("太阳系统", d), (Tokens{"太阳系", "统"}));
}

TEST(Tokenize, MixedScriptsAndFullWidthPunctuation) {
  Dictionary d({"灯泡"});
  EXPECT_EQ(tokenize("灯泡亮了，LED！", d), (Tokens{"灯泡", "亮", "了", "LED"}));
  EXPECT_EQ(tokenize("「水」"), (Tokens{"水"}));
}

TEST(Tokenize, ApostropheJoinsWord) { EXPECT_EQ(tokenize("don't stop"), (Tokens{"dont", "stop"})); }

TEST(Tokenize, EmptyTextRejected) {
  EXPECT_THROW(tokenize(""), Error);
  EXPECT_THROW(tokenize("  \n"), Error);
}

TEST(StripPunctuation, Examples) {
  EXPECT_EQ(strip_punctuation({"a", ",", "b"}), (Tokens{"a", "b"}));
  EXPECT_EQ(strip_punctuation({"，", "。"}), Tokens{});
  EXPECT_EQ(strip_punctuation({"don't"}), Tokens{"dont"});
  EXPECT_EQ(strip_punctuation({"(100)", "...", "—"}), Tokens{"100"});
}

TEST(NormalizeTokens, FoldsAsciiOnly) {
  EXPECT_EQ(normalize_tokens({"Boat", "LED", "水"}), (Tokens{"boat", "led", "水"}));
}

TEST(Dictionary, LoadsTermsAndFrequencies) {
  const auto path = std::filesystem::temp_directory_path() / "cnorm_dict_test.txt";
  {
    std::ofstream out(path);
    out << "沸腾\t42\n太阳系\n\n";
  }
  const auto d = Dictionary::load(path.string());
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.max_length(), 3u);
  EXPECT_EQ(d.frequency("沸腾"), 42);
  EXPECT_EQ(d.frequency("太阳系"), 0);
  EXPECT_TRUE(d.contains(U"沸腾"));
  std::filesystem::remove(path);
}

namespace {

std::string random_text(std::mt19937& rng) {
  static const std::vector<std::string> pieces = {"a", "B", "c", "7", " ", "  ", "\t", ",", ".", "'", "!", "(",
                                                  ")", "水", "沸", "腾", "。", "，", "「", "」", "é", "-", "?"};
  std::string s;
  const int len = 1 + static_cast<int>(rng() % 30);
  for (int i = 0; i < len; ++i) s += pieces[rng() % pieces.size()];
  return s;
}

std::u32string content_chars(std::u32string_view s) {
  std::u32string out;
  for (char32_t c : s)
    if (!is_punctuation(c) && c != U' ' && c != U'\t' && c != U'\n') out += c;
  return out;
}

}  // namespace

TEST(TokenizeProperties, RandomInputs) {
  std::mt19937 rng(17);
  Dictionary d({"沸腾", "水沸"});
  for (int trial = 0; trial < 500; ++trial) {
    const auto text = random_text(rng);
    if (content_chars(to_u32(text)).empty()) continue;
    const auto toks = tokenize(text, d);
    std::u32string joined;
    for (const auto& t : toks) {
      ASSERT_FALSE(t.empty());
      ASSERT_EQ(t.find_first_of(" \t\n"), std::string::npos) << text;
      ASSERT_FALSE(content_chars(to_u32(t)).empty()) << "punctuation-only token from " << text;
      joined += content_chars(to_u32(t));
    }
    EXPECT_EQ(joined, content_chars(to_u32(text))) << text;
    const auto once = strip_punctuation(toks);
    EXPECT_EQ(strip_punctuation(once), once);
  }
}

TEST(StripPunctuationProperty, Idempotent) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens toks;
    for (int i = 0; i < 6; ++i) toks.push_back(random_text(rng));
    const auto once = strip_punctuation(toks);
    EXPECT_EQ(strip_punctuation(once), once);
  }
}

TEST(Utf8, RoundTrip) {
  const std::string s = "水 boils à 100°";
  EXPECT_EQ(to_utf8(to_u32(s)), s);
}
