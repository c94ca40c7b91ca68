#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cnorm/text.hpp"

namespace cnorm {

enum class PValueMethod { exact_permutation, normal_approx };

std::string to_string(PValueMethod m);

struct TauResult {
  double tau = 0.0;
  double p_value = 1.0;
  PValueMethod method = PValueMethod::exact_permutation;
  std::size_t n = 0;
};

/// Pair counts behind tau_b: concordant, discordant, and pairs tied in x / y.
struct PairCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t ties_x = 0;
  std::int64_t ties_y = 0;
  std::int64_t pairs = 0;
};

PairCounts count_pairs(std::span<const double> x, std::span<const double> y);

/// tau_b = (C - D) / sqrt((n0 - n1)(n0 - n2)).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Two-sided test of tau_b. Up to `exact_limit` observations every
/// permutation of y is enumerated; above it the tie-corrected normal
/// approximation is used.
TauResult kendall_p(std::span<const double> x, std::span<const double> y, std::size_t exact_limit = 10);

/// Normal-approximation p-value regardless of n.
double kendall_p_normal(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
double mean(std::span<const double> values, std::span<const double> weights);

struct RateResult {
  std::size_t count = 0;
  double rate = 0.0;
};

/// Fraction of texts containing at least one lexicon term as a token.
RateResult reproduction_rate(std::span<const std::string> texts, const std::set<std::string>& lexicon,
                             const Segmenter& segmenter = LongestMatchSegmenter());

struct ThemeTexts {
  std::vector<std::string> texts;
  std::set<std::string> object_lexicon;
  double sample_size = 0.0;
};

/// Per-theme mention rate combined by a sample-size weighted mean.
double object_mention_rate(std::span<const ThemeTexts> themes,
                           const Segmenter& segmenter = LongestMatchSegmenter());

struct KappaResult {
  double kappa = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  /// Both raters used a single category each; kappa set by convention.
  bool degenerate = false;
};

struct BootstrapOptions {
  std::size_t resamples = 10000;
  std::uint64_t seed = 1;
  double level = 0.95;
};

KappaResult cohen_kappa(std::span<const std::string> ratings_a, std::span<const std::string> ratings_b,
                        const BootstrapOptions& boot = {});

struct FactorRowData {
  std::string theme_id;
  double sample_size = 0.0;
  double accuracy = 0.0;
  double median_sim = 0.0;
  double region75 = 0.0;
  double abstract_code = 1.0;
  double focus_code = 1.0;
};

struct FactorTable {
  std::vector<FactorRowData> rows;
};

inline constexpr std::array<const char*, 3> kFactorNames = {"sample_size", "abstract_code", "focus_code"};
inline constexpr std::array<const char*, 3> kMetricNames = {"accuracy", "median_sim", "region75"};

struct FactorCell {
  std::string factor;
  std::string metric;
  std::optional<TauResult> result;
  std::string error;  // set when result is empty
  bool moderate = false;
  bool significant = false;
};

struct FactorReport {
  std::array<std::array<FactorCell, 3>, 3> cells;  // [factor][metric]

  const FactorCell& cell(std::string_view factor, std::string_view metric) const;
};

inline constexpr double kModerateTau = 0.4;
inline constexpr double kSignificanceLevel = 0.05;

FactorReport factor_analysis(const FactorTable& table);

/// Norm table CSV: theme_id,sample_size,accuracy,median_sim,region75_pct,abstract_code,focus_code.
FactorTable parse_norm_table(std::istream& in);
FactorTable load_norm_table(const std::string& path);
void write_norm_table(const FactorTable& table, std::ostream& out);

}  // namespace cnorm
