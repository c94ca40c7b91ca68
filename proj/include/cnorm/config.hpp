#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "cnorm/embed.hpp"
#include "cnorm/llmclient.hpp"
#include "cnorm/simdist.hpp"

namespace cnorm {

enum class EmbedScope { per_theme, global };

struct KeywordOverride {
  std::string add_term;
  std::optional<std::size_t> reference_rank;
};

/// Everything `analyze`, `report` and `recognize` read from the config file.
struct PipelineConfig {
  EmbedConfig embed;
  EmbedScope scope = EmbedScope::per_theme;
  std::size_t keyword_count = 10;
  std::map<std::string, KeywordOverride> keyword_overrides;  // theme_id -> override
  std::size_t histogram_bins = 50;
  double heatmap_floor = 0.9;
  double below_threshold = 0.8;
  QuantileMethod quantile_method = QuantileMethod::linear;
  std::string dictionary_path;  // empty: no dictionary
  unsigned matrix_threads = 1;
  EndpointConfig endpoint;

  SummaryOptions summary_options() const { return {histogram_bins, below_threshold, quantile_method}; }
  void validate() const;

  static PipelineConfig from_json(const nlohmann::json& j, const std::string& base_dir = {});
  static PipelineConfig load(const std::string& path);
  /// Config echo for provenance blocks; never contains secrets.
  nlohmann::json to_json() const;
};

}  // namespace cnorm
