#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cnorm {

enum class RecordSource { llm, human };

/// One free-text description plus label from one recognition pass.
struct RecognitionRecord {
  std::string item_id;
  std::string theme_id;
  int pass_index = 1;
  std::string label;
  std::string reasoning_text;
  RecordSource source = RecordSource::llm;
  // Only meaningful on pass-1 lines.
  std::optional<bool> correct;
  bool flagged_unclear = false;
};

enum class ExclusionReason { none, three_way_disagreement, flagged_unclear };

struct ResolvedItem {
  std::string item_id;
  std::string theme_id;
  std::optional<std::string> final_label;  // absent iff excluded
  std::string reasoning_text;
  std::optional<bool> correct;  // ingested human judgment
  bool excluded = false;
  ExclusionReason exclusion_reason = ExclusionReason::none;
};

struct FactorRow {
  std::string theme_id;
  int abstract_code = 1;
  int focus_code = 1;
};

struct ThemeLexicon {
  std::set<std::string> example_terms;
  std::set<std::string> object_terms;
};

struct ThemeCorpus {
  std::string theme_id;
  std::vector<ResolvedItem> items;
  int abstract_code = 1;
  int focus_code = 1;
  std::set<std::string> example_lexicon;
  std::set<std::string> object_lexicon;

  std::size_t sample_size() const noexcept { return items.size(); }
  /// Fraction of judged items marked correct; empty when no item carries a judgment.
  std::optional<double> accuracy() const;
};

enum class CorpusFormat { jsonl };

std::string to_string(RecordSource s);
std::string to_string(ExclusionReason r);

/// Case-fold, trim, and collapse internal whitespace runs to one space.
std::string normalize_label(std::string_view label);

std::vector<RecognitionRecord> parse_corpus(std::istream& in);
std::vector<RecognitionRecord> load_corpus(const std::string& path,
                                           CorpusFormat format = CorpusFormat::jsonl);
std::string record_to_json_line(const RecognitionRecord& r);

/// Applies the two-pass / 2-of-3 stability protocol to every pass of one item.
ResolvedItem resolve_item(std::span<const RecognitionRecord> passes);

/// Groups records by item_id (first-appearance order) and resolves each group.
std::vector<ResolvedItem> resolve_all(std::span<const RecognitionRecord> records);

std::string resolved_to_json_line(const ResolvedItem& item);
void write_resolved(const std::string& path, std::span<const ResolvedItem> items);

std::map<std::string, FactorRow> parse_factors(std::istream& in);
std::map<std::string, FactorRow> load_factors(const std::string& path);

std::map<std::string, ThemeLexicon> parse_lexicons(std::istream& in);
std::map<std::string, ThemeLexicon> load_lexicons(const std::string& path);

/// Drops excluded items and builds one corpus per theme, ordered by theme_id.
std::vector<ThemeCorpus> assemble_themes(std::span<const ResolvedItem> resolved,
                                         const std::map<std::string, FactorRow>& factors,
                                         const std::map<std::string, ThemeLexicon>& lexicons);

}  // namespace cnorm
