#pragma once

#include <span>
#include <string>
#include <vector>

#include "cnorm/config.hpp"
#include "cnorm/corpus.hpp"
#include "cnorm/embed.hpp"
#include "cnorm/keywords.hpp"
#include "cnorm/report.hpp"
#include "cnorm/simdist.hpp"
#include "cnorm/text.hpp"

namespace cnorm {

struct ThemeResult {
  std::vector<TokenStream> streams;
  KeywordSet keywords;
  SimilarityMatrix matrix;
  ThemeAnalysis analysis;
  std::vector<double> epoch_loss;
  /// Items with no in-vocabulary token; left out of the matrix.
  std::vector<std::string> skipped_items;
};

/// tokenize -> strip punctuation -> case folding, one stream per item.
std::vector<TokenStream> prepare_streams(const ThemeCorpus& corpus, const Segmenter& segmenter);

/// Runs the full similarity pipeline for every theme. With global scope one
/// embedding is trained over all themes.
std::vector<ThemeResult> analyze_corpora(std::span<const ThemeCorpus> corpora, const PipelineConfig& config);

/// SHA-256 over the canonical resolved-item serialization.
std::string corpus_digest(std::span<const ResolvedItem> items);

/// Norm table rows; throws when a theme has no accuracy judgments.
FactorTable factor_table_from(std::span<const ThemeCorpus> corpora, std::span<const ThemeResult> results);

/// Theme ids reduced to [A-Za-z0-9._-] for use as directory names.
std::string theme_dir_name(const std::string& theme_id);

/// Writes report.{txt,json}, norm_table.csv, factors.json (when available) and
/// themes/<id>/{summary.json, matrix.csv, histogram.svg, heatmap.svg}.
NormReport write_analysis(const std::string& out_dir, std::span<const ThemeCorpus> corpora,
                          std::span<const ThemeResult> results, const PipelineConfig& config,
                          const std::string& digest);

/// Rebuilds report files and figures from an existing analysis directory.
NormReport rebuild_report(const std::string& out_dir, const PipelineConfig& config);

}  // namespace cnorm
