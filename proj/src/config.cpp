#include "cnorm/config.hpp"

#include <filesystem>
#include <fstream>

#include "cnorm/error.hpp"

namespace cnorm {

using nlohmann::json;

void PipelineConfig::validate() const {
  embed.validate();
  if (keyword_count < 1) throw Error("invalid_config", "keywords.k must be >= 1");
  if (histogram_bins < 1) throw Error("invalid_config", "histogram_bins must be >= 1");
  if (!(heatmap_floor >= -1.0 && heatmap_floor < 1.0)) throw Error("invalid_config", "heatmap_floor must lie in [-1, 1)");
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::string& base_dir) {
  PipelineConfig c;
  try {
    if (auto e = j.find("embed"); e != j.end()) {
      auto& ec = c.embed;
      ec.dim = e->value("dim", ec.dim);
      ec.window = e->value("window", ec.window);
      ec.negatives = e->value("negatives", ec.negatives);
      ec.epochs = e->value("epochs", ec.epochs);
      ec.learning_rate = e->value("learning_rate", ec.learning_rate);
      ec.min_learning_rate = e->value("min_learning_rate", ec.min_learning_rate);
      ec.min_count = e->value("min_count", ec.min_count);
      ec.seed = e->value("seed", ec.seed);
      ec.keyword_boost = e->value("keyword_boost", ec.keyword_boost);
      ec.deterministic = e->value("deterministic", ec.deterministic);
      ec.threads = e->value("threads", ec.threads);
    }
    const auto scope = j.value("embed_scope", std::string("per_theme"));
    if (scope == "per_theme") {
      c.scope = EmbedScope::per_theme;
    } else if (scope == "global") {
      c.scope = EmbedScope::global;
    } else {
      throw Error("invalid_config", "embed_scope must be per_theme or global");
    }
    if (auto k = j.find("keywords"); k != j.end()) {
      c.keyword_count = k->value("k", c.keyword_count);
      if (auto o = k->find("overrides"); o != k->end()) {
        for (const auto& [theme, spec] : o->items()) {
          KeywordOverride ov;
          if (spec.is_string()) {
            ov.add_term = spec.get<std::string>();
          } else {
            ov.add_term = spec.at("add_term").get<std::string>();
            if (spec.contains("reference_rank") && !spec.at("reference_rank").is_null())
              ov.reference_rank = spec.at("reference_rank").get<std::size_t>();
          }
          c.keyword_overrides.emplace(theme, ov);
        }
      }
    }
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
    c.heatmap_floor = j.value("heatmap_floor", c.heatmap_floor);
    c.below_threshold = j.value("below_threshold", c.below_threshold);
    c.quantile_method = parse_quantile_method(j.value("quantile_method", std::string("linear")));
    c.matrix_threads = j.value("matrix_threads", c.matrix_threads);
    if (auto d = j.find("dictionary"); d != j.end() && d->is_string()) {
      std::filesystem::path p = d->get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      c.dictionary_path = p.string();
    }
    if (auto e = j.find("endpoint"); e != j.end()) c.endpoint = EndpointConfig::from_json(*e);
  } catch (const json::exception& e) {
    throw Error("invalid_config", e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

json PipelineConfig::to_json() const {
  json overrides = json::object();
  for (const auto& [theme, ov] : keyword_overrides) {
    json o = {{"add_term", ov.add_term}};
    o["reference_rank"] = ov.reference_rank ? json(*ov.reference_rank) : json(nullptr);
    overrides[theme] = o;
  }
  return {{"embed",
           {{"dim", embed.dim},
            {"window", embed.window},
            {"negatives", embed.negatives},
            {"epochs", embed.epochs},
            {"learning_rate", embed.learning_rate},
            {"min_learning_rate", embed.min_learning_rate},
            {"min_count", embed.min_count},
            {"seed", embed.seed},
            {"keyword_boost", embed.keyword_boost},
            {"deterministic", embed.deterministic}}},
          {"embed_scope", scope == EmbedScope::global ? "global" : "per_theme"},
          {"keywords", {{"k", keyword_count}, {"overrides", overrides}}},
          {"histogram_bins", histogram_bins},
          {"heatmap_floor", heatmap_floor},
          {"below_threshold", below_threshold},
          {"quantile_method", to_string(quantile_method)},
          {"dictionary", dictionary_path}};
}

}  // namespace cnorm
