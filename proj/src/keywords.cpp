#include "cnorm/keywords.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cnorm/error.hpp"

namespace cnorm {

bool KeywordSet::contains(std::string_view term) const { return weight(term).has_value(); }

std::optional<double> KeywordSet::weight(std::string_view term) const {
  for (const auto& e : entries)
    if (e.term == term) return e.weight;
  return std::nullopt;
}

double KeywordSet::max_weight() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.weight);
  return m;
}

KeywordSet extract_keywords(std::span<const TokenStream> theme_docs, std::size_t k, std::string theme_id) {
  if (theme_docs.empty()) throw Error("empty_input", "no documents");
  if (k == 0) throw Error("invalid_argument", "k must be >= 1");

  struct TermStats {
    std::size_t first_seen;
    std::size_t count = 0;
    std::size_t df = 0;
  };
  std::unordered_map<std::string, TermStats> stats;
  std::vector<std::string> order;
  std::size_t total_tokens = 0;

  for (const auto& doc : theme_docs) {
    std::unordered_set<std::string_view> in_doc;
    for (const auto& tok : doc.tokens) {
      auto [it, inserted] = stats.try_emplace(tok, TermStats{order.size()});
      if (inserted) order.push_back(tok);
      ++it->second.count;
      if (in_doc.insert(it->first).second) ++it->second.df;
      ++total_tokens;
    }
  }

  KeywordSet out;
  out.theme_id = std::move(theme_id);
  if (total_tokens == 0) return out;

  const double n_docs = static_cast<double>(theme_docs.size());
  struct Scored {
    std::size_t first_seen;
    double score;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = stats.at(order[i]);
    const double tf = static_cast<double>(s.count) / static_cast<double>(total_tokens);
    const double score = tf * std::log(n_docs / static_cast<double>(s.df));
    if (score > 0.0) scored.push_back({i, score});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (scored.size() > k) scored.resize(k);
  for (const auto& s : scored) out.entries.push_back({order[s.first_seen], s.score});
  return out;
}

KeywordSet apply_override(const KeywordSet& ks, const std::string& add_term,
                          std::optional<std::size_t> reference_weight_rank) {
  if (ks.entries.empty()) throw Error("empty_input", "keyword set is empty");
  if (ks.contains(add_term)) throw Error("duplicate_term", "'" + add_term + "' is already a keyword");

  KeywordSet out = ks;
  // Entries are sorted heaviest first, so the last one has the lowest weight.
  double weight = out.entries.back().weight;
  if (reference_weight_rank) {
    if (*reference_weight_rank < 1 || *reference_weight_rank > out.entries.size())
      throw Error("invalid_argument", "reference rank out of range");
    weight = out.entries[*reference_weight_rank - 1].weight;
  }
  out.entries.pop_back();
  out.entries.push_back({add_term, weight});
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const KeywordEntry& a, const KeywordEntry& b) { return a.weight > b.weight; });
  return out;
}

}  // namespace cnorm
