#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cnorm {

struct TokenStream {
  std::string item_id;
  std::vector<std::string> tokens;
};

/// ASCII case folding; other code points pass through unchanged.
std::string fold_case(std::string_view s);

/// Unicode punctuation (general categories Pc Pd Ps Pe Pi Pf Po) plus the
/// CJK full-width symbol forms commonly used as punctuation.
bool is_punctuation(char32_t cp);

/// True for code points of scripts written without spaces (Han, Hiragana, Katakana).
bool is_unsegmented_script(char32_t cp);

/// Term list for dictionary segmentation. Lines are `term` or `term<TAB>frequency`.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(const std::vector<std::string>& terms);

  static Dictionary load(const std::string& path);

  void add(std::string_view term, long frequency = 0);
  bool contains(std::u32string_view term) const;
  std::size_t max_length() const noexcept { return max_length_; }
  std::size_t size() const noexcept { return terms_.size(); }
  /// Frequency column as read from the file (0 when absent); unused by longest match.
  long frequency(std::string_view term) const;

 private:
  std::unordered_map<std::u32string, long> terms_;
  std::size_t max_length_ = 0;
};

/// Segments one run of unsegmented-script text into words.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<std::u32string> segment(std::u32string_view run) const = 0;
};

/// Forward maximum matching against a dictionary, falling back to single
/// characters where nothing matches. The dictionary must outlive the segmenter.
class LongestMatchSegmenter final : public Segmenter {
 public:
  LongestMatchSegmenter();
  explicit LongestMatchSegmenter(const Dictionary& dict) : dict_(&dict) {}
  std::vector<std::u32string> segment(std::u32string_view run) const override;

 private:
  const Dictionary* dict_;
};

/// Splits text into tokens. Space-delimited scripts split on whitespace and
/// punctuation (an apostrophe inside a word is dropped, joining the halves);
/// unsegmented runs go through `segmenter`. Case is preserved.
std::vector<std::string> tokenize(std::string_view text, const Segmenter& segmenter);
std::vector<std::string> tokenize(std::string_view text, const Dictionary& dict = {});
TokenStream tokenize_item(std::string item_id, std::string_view text, const Segmenter& segmenter);

/// Drops tokens made only of punctuation and removes punctuation from mixed tokens.
std::vector<std::string> strip_punctuation(const std::vector<std::string>& tokens);

/// Case-folds every token; used before keyword scoring and lexicon matching.
std::vector<std::string> normalize_tokens(std::vector<std::string> tokens);

std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);

}  // namespace cnorm
