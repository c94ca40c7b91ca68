#include "cnorm/text.hpp"

#include <algorithm>
#include <fstream>

#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include "cnorm/error.hpp"

namespace cnorm {

namespace {

bool in_range(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

bool is_fullwidth_symbol(char32_t cp) {
  return in_range(cp, 0xFF01, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) || in_range(cp, 0xFF3B, 0xFF40) ||
         in_range(cp, 0xFF5B, 0xFF65) || in_range(cp, 0x3001, 0x3003) || in_range(cp, 0x3008, 0x3011) ||
         in_range(cp, 0x3014, 0x301F);
}

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)); }

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019 || cp == 0x02BC; }

}  // namespace

std::u32string to_u32(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto len = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    out.push_back(c < 0 ? char32_t{0xFFFD} : static_cast<char32_t>(c));
  }
  return out;
}

std::string to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t n = 0;
    UBool err = false;
    U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(cp), err);
    if (err) continue;
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
  }
  return out;
}

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool is_punctuation(char32_t cp) {
  return u_ispunct(static_cast<UChar32>(cp)) || is_fullwidth_symbol(cp);
}

bool is_unsegmented_script(char32_t cp) {
  UErrorCode status = U_ZERO_ERROR;
  const UScriptCode sc = uscript_getScript(static_cast<UChar32>(cp), &status);
  if (U_FAILURE(status)) return false;
  return sc == USCRIPT_HAN || sc == USCRIPT_HIRAGANA || sc == USCRIPT_KATAKANA;
}

Dictionary::Dictionary(const std::vector<std::string>& terms) {
  for (const auto& t : terms) add(t);
}

Dictionary Dictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open dictionary " + path);
  Dictionary d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    long freq = 0;
    if (tab != std::string::npos) {
      try {
        freq = std::stol(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw Error("parse_error", "dictionary line " + std::to_string(lineno) + ": bad frequency");
      }
      line.resize(tab);
    }
    d.add(line, freq);
  }
  return d;
}

void Dictionary::add(std::string_view term, long frequency) {
  auto u = to_u32(term);
  if (u.empty()) return;
  max_length_ = std::max(max_length_, u.size());
  terms_[std::move(u)] = frequency;
}

bool Dictionary::contains(std::u32string_view term) const {
  return terms_.find(std::u32string(term)) != terms_.end();
}

long Dictionary::frequency(std::string_view term) const {
  auto it = terms_.find(to_u32(term));
  return it == terms_.end() ? 0 : it->second;
}

LongestMatchSegmenter::LongestMatchSegmenter() {
  static const Dictionary empty;
  dict_ = &empty;
}

std::vector<std::u32string> LongestMatchSegmenter::segment(std::u32string_view run) const {
  std::vector<std::u32string> out;
  std::size_t pos = 0;
  while (pos < run.size()) {
    std::size_t take = 1;
    for (std::size_t len = std::min(dict_->max_length(), run.size() - pos); len > 1; --len) {
      if (dict_->contains(run.substr(pos, len))) {
        take = len;
        break;
      }
    }
    out.emplace_back(run.substr(pos, take));
    pos += take;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text, const Segmenter& segmenter) {
  const auto cps = to_u32(text);
  if (std::all_of(cps.begin(), cps.end(), is_space)) throw Error("empty_text", "");

  std::vector<std::string> out;
  std::u32string word, run;
  auto flush_word = [&] {
    if (!word.empty()) out.push_back(to_utf8(word));
    word.clear();
  };
  auto flush_run = [&] {
    if (!run.empty())
      for (auto& w : segmenter.segment(run)) out.push_back(to_utf8(w));
    run.clear();
  };
  auto is_word_char = [](char32_t cp) {
    return !is_space(cp) && !is_punctuation(cp) && !is_unsegmented_script(cp);
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (is_space(cp)) {
      flush_word();
      flush_run();
    } else if (is_punctuation(cp)) {
      const bool joins = is_apostrophe(cp) && !word.empty() && i + 1 < cps.size() && is_word_char(cps[i + 1]);
      if (!joins) {
        flush_word();
        flush_run();
      }
    } else if (is_unsegmented_script(cp)) {
      flush_word();
      run.push_back(cp);
    } else {
      flush_run();
      word.push_back(cp);
    }
  }
  flush_word();
  flush_run();
  return out;
}

std::vector<std::string> tokenize(std::string_view text, const Dictionary& dict) {
  return tokenize(text, LongestMatchSegmenter(dict));
}

TokenStream tokenize_item(std::string item_id, std::string_view text, const Segmenter& segmenter) {
  return TokenStream{std::move(item_id), tokenize(text, segmenter)};
}

std::vector<std::string> strip_punctuation(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto u = to_u32(t);
    std::erase_if(u, is_punctuation);
    if (!u.empty()) out.push_back(to_utf8(u));
  }
  return out;
}

std::vector<std::string> normalize_tokens(std::vector<std::string> tokens) {
  for (auto& t : tokens) t = fold_case(t);
  return tokens;
}

}  // namespace cnorm
