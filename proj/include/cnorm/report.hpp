#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnorm/corpus.hpp"
#include "cnorm/simdist.hpp"
#include "cnorm/stats.hpp"

namespace cnorm {

/// Per-theme outcome of the similarity pipeline.
struct ThemeAnalysis {
  std::string theme_id;
  std::size_t sample_size = 0;
  std::optional<double> accuracy;
  DistributionSummary summary;
  RepresentativePair representative;
  /// Strict upper-triangle values; empty when the theme was loaded from disk
  /// without its matrix (pooled statistics are then omitted).
  std::vector<double> pair_values;
};

struct ThemeRow {
  std::string theme_id;
  std::size_t sample_size = 0;
  std::optional<double> accuracy;
  double median_sim = 0.0;
  double region75_pct = 0.0;
  double frac_below_pct = 0.0;
  RepresentativePair representative;
};

struct OverallBlock {
  std::size_t total_items = 0;
  std::optional<double> mean_accuracy;  // unweighted over themes
  double mean_of_medians = 0.0;
  double median_of_medians = 0.0;
  double mean_region75_pct = 0.0;           // unweighted over themes
  double weighted_mean_region75_pct = 0.0;  // weighted by sample size
  std::optional<double> pooled_median;       // over all pairs of all themes
  std::optional<double> pooled_region75_pct;
};

struct Provenance {
  nlohmann::json config;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string corpus_digest;
  std::string tool = "cnorm 1.0";
};

struct NormReport {
  std::vector<ThemeRow> rows;
  OverallBlock overall;
  std::optional<FactorReport> factors;
  Provenance provenance;
};

/// Rows follow `analyses` order.
NormReport build_report(std::span<const ThemeAnalysis> analyses, std::optional<FactorReport> factors,
                        Provenance provenance, QuantileMethod method = QuantileMethod::linear);

/// Same, checking that `corpora` and `analyses` describe the same themes in the
/// same order and taking sample sizes and accuracies from the corpora.
NormReport build_report(std::span<const ThemeCorpus> corpora, std::span<const ThemeAnalysis> analyses,
                        std::optional<FactorReport> factors, Provenance provenance,
                        QuantileMethod method = QuantileMethod::linear);

/// "median 0.967, 75% Region 1.49 (% of [0,1])"
std::string format_theme_line(const DistributionSummary& s);

void write_report_text(const NormReport& report, std::ostream& out);
nlohmann::json report_to_json(const NormReport& report);
nlohmann::json factor_report_to_json(const FactorReport& report);
void write_factor_text(const FactorReport& report, std::ostream& out);

nlohmann::json analysis_to_json(const ThemeAnalysis& a);
ThemeAnalysis analysis_from_json(const nlohmann::json& j);

/// Histogram SVG with bars over [lo, 1] and a "% < threshold" note when nonzero.
std::string render_histogram(const DistributionSummary& summary);
void emit_histogram(const DistributionSummary& summary, const std::string& path);

/// n x n heatmap; the colour ramp spans [floor, 1] and lower values share one
/// below-floor colour.
std::string render_heatmap(const SimilarityMatrix& matrix, double display_floor = 0.9);
void emit_heatmap(const SimilarityMatrix& matrix, const std::string& path, double display_floor = 0.9);

inline constexpr const char* kBelowFloorColor = "#bdbdbd";

}  // namespace cnorm
