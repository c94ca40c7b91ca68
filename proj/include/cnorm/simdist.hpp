#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cnorm/embed.hpp"

namespace cnorm {

/// Symmetric pairwise cosine similarities over one theme's sentence vectors.
struct SimilarityMatrix {
  std::string theme_id;
  std::size_t n = 0;
  std::vector<double> values;  // n x n, row major
  std::vector<std::string> item_ids;

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  std::size_t pair_count() const noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }
  /// Strict upper triangle in row order: (0,1), (0,2), ..., (n-2,n-1).
  std::vector<double> upper_triangle() const;
};

enum class QuantileMethod { linear, lower, higher, nearest };

QuantileMethod parse_quantile_method(const std::string& name);
std::string to_string(QuantileMethod m);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct DistributionSummary {
  std::string theme_id;
  std::size_t pair_count = 0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double q125 = 0.0;
  double q875 = 0.0;
  double region75 = 0.0;  // q875 - q125, a fraction of [0, 1]
  double frac_below = 0.0;
  double below_threshold = 0.8;
  std::vector<HistogramBin> histogram;
};

struct SummaryOptions {
  std::size_t bins = 50;
  double below_threshold = 0.8;
  QuantileMethod method = QuantileMethod::linear;
};

struct RepresentativePair {
  std::string first;
  std::string second;
  double similarity = 0.0;
};

double cosine(std::span<const double> u, std::span<const double> v);

/// Fills the matrix; `threads` > 1 splits rows across workers with identical results.
SimilarityMatrix similarity_matrix(std::span<const SentenceVector> vectors, std::string theme_id = {},
                                   unsigned threads = 1);

/// Quantile of ascending `sorted` values. Linear: p = q (m - 1), interpolated
/// between neighbouring order statistics.
double quantile(std::span<const double> sorted, double q, QuantileMethod method = QuantileMethod::linear);

DistributionSummary summarize_values(std::vector<double> values, const SummaryOptions& opts = {},
                                     std::string theme_id = {});
DistributionSummary summarize(const SimilarityMatrix& matrix, const SummaryOptions& opts = {});

/// The pair whose similarity is closest to the median of the pairs lying in
/// [q125, q875]; ties go to the lexicographically smallest id pair.
RepresentativePair representative_pair(const SimilarityMatrix& matrix,
                                       QuantileMethod method = QuantileMethod::linear);

/// Delimited square table with an item_id header row and column.
void write_matrix_csv(const SimilarityMatrix& matrix, std::ostream& out);
SimilarityMatrix read_matrix_csv(std::istream& in, std::string theme_id = {});

}  // namespace cnorm
