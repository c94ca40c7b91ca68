#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cnorm/keywords.hpp"
#include "cnorm/text.hpp"

namespace cnorm {

/// Skip-gram negative-sampling hyperparameters.
struct EmbedConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  int min_count = 1;
  std::uint64_t seed = 1;
  double keyword_boost = 1.0;  // alpha
  bool deterministic = false;
  int threads = 0;  // parallel mode only; 0 = hardware concurrency

  /// Throws Error("invalid_config") when an invariant is violated.
  void validate() const;
};

struct Vocabulary {
  std::vector<std::string> tokens;  // first-occurrence order
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, std::size_t> index;
  /// Cumulative count^0.75 distribution used to draw negatives.
  std::vector<double> noise_cdf;

  std::size_t size() const noexcept { return tokens.size(); }
  std::optional<std::size_t> find(std::string_view token) const;
};

Vocabulary build_vocab(std::span<const TokenStream> streams, int min_count);

struct SgnsGradients {
  double loss = 0.0;
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

/// Loss -log s(u.v_o) - sum_n log s(-u.v_n) for one (center, context) pair
/// and its exact partial derivatives. Dot products are clamped to +-30.
SgnsGradients sgns_step(std::span<const double> center, std::span<const double> context,
                        std::span<const std::span<const double>> negatives);

struct EmbeddingModel {
  Vocabulary vocab;
  std::vector<double> input_vectors;   // |V| x dim, row major
  std::vector<double> output_vectors;  // |V| x dim, row major
  EmbedConfig config;
  std::vector<double> epoch_loss;  // mean pair loss per epoch

  std::span<const double> input_row(std::size_t i) const;
  std::span<const double> output_row(std::size_t i) const;
  std::optional<std::span<const double>> vector(std::string_view token) const;
};

EmbeddingModel train(std::span<const TokenStream> streams, const KeywordSet& keywords, const EmbedConfig& config);

struct SentenceVector {
  std::string item_id;
  std::vector<double> vector;
};

/// Keyword-weighted mean of input vectors; out-of-vocabulary tokens are
/// skipped. Keyword weight is 1 + alpha * w / w_max, all other tokens 1.
SentenceVector sentence_vector(const TokenStream& stream, const EmbeddingModel& model, const KeywordSet& keywords,
                               double alpha);

void save_model(const EmbeddingModel& model, std::ostream& out);
void save_model(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_model(std::istream& in);
EmbeddingModel load_model(const std::string& path);

}  // namespace cnorm
