#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnorm/text.hpp"

namespace cnorm {

struct KeywordEntry {
  std::string term;
  double weight = 0.0;

  bool operator==(const KeywordEntry&) const = default;
};

/// Up to k (term, weight) pairs for one theme, heaviest first.
struct KeywordSet {
  std::string theme_id;
  std::vector<KeywordEntry> entries;

  bool contains(std::string_view term) const;
  /// Weight of `term`, or nullopt when it is not a keyword.
  std::optional<double> weight(std::string_view term) const;
  double max_weight() const;
};

/// TF-IDF over one theme: tf is the term's theme-wide count over the theme's
/// token total, idf = ln(N / df). Returns the top k positive scores; equal
/// scores keep the order of first occurrence.
KeywordSet extract_keywords(std::span<const TokenStream> theme_docs, std::size_t k = 10,
                            std::string theme_id = {});

/// Replaces the lowest-weight keyword with `add_term`. The new entry takes the
/// weight found at 1-based `reference_weight_rank` before removal, or the
/// removed entry's weight when no rank is given.
KeywordSet apply_override(const KeywordSet& ks, const std::string& add_term,
                          std::optional<std::size_t> reference_weight_rank = std::nullopt);

}  // namespace cnorm
