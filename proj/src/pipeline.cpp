#include "cnorm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cnorm/error.hpp"
#include "digest.hpp"

namespace cnorm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Keyword weights from every theme scaled to that theme's maximum, keeping the
// largest per term, for training one shared model.
KeywordSet merged_keywords(std::span<const KeywordSet> sets) {
  KeywordSet out;
  out.theme_id = "*";
  for (const auto& ks : sets) {
    const double w_max = ks.max_weight();
    if (w_max <= 0.0) continue;
    for (const auto& e : ks.entries) {
      const double w = e.weight / w_max;
      auto it = std::find_if(out.entries.begin(), out.entries.end(), [&](const auto& x) { return x.term == e.term; });
      if (it == out.entries.end()) {
        out.entries.push_back({e.term, w});
      } else {
        it->weight = std::max(it->weight, w);
      }
    }
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const auto& a, const auto& b) { return a.weight > b.weight; });
  return out;
}

std::optional<FactorReport> try_factor_report(const FactorTable& table) {
  if (table.rows.size() < 3) return std::nullopt;
  return factor_analysis(table);
}

Provenance make_provenance(const PipelineConfig& config, const std::string& digest) {
  Provenance p;
  p.config = config.to_json();
  p.seed = config.embed.seed;
  p.deterministic = config.embed.deterministic;
  p.corpus_digest = digest;
  return p;
}

void write_reports(const fs::path& out, const NormReport& rep) {
  std::ostringstream txt;
  write_report_text(rep, txt);
  write_text(out / "report.txt", txt.str());
  write_text(out / "report.json", report_to_json(rep).dump(2) + "\n");
  if (rep.factors) {
    write_text(out / "factors.json", factor_report_to_json(*rep.factors).dump(2) + "\n");
    std::ostringstream ft;
    write_factor_text(*rep.factors, ft);
    write_text(out / "factors.txt", ft.str());
  }
}

}  // namespace

std::vector<TokenStream> prepare_streams(const ThemeCorpus& corpus, const Segmenter& segmenter) {
  std::vector<TokenStream> out;
  out.reserve(corpus.items.size());
  for (const auto& item : corpus.items) {
    TokenStream ts{item.item_id, {}};
    try {
      ts.tokens = normalize_tokens(strip_punctuation(tokenize(item.reasoning_text, segmenter)));
    } catch (const Error& e) {
      if (e.code() != "empty_text") throw;
    }
    out.push_back(std::move(ts));
  }
  return out;
}

std::vector<ThemeResult> analyze_corpora(std::span<const ThemeCorpus> corpora, const PipelineConfig& config) {
  config.validate();
  Dictionary dict;
  if (!config.dictionary_path.empty()) dict = Dictionary::load(config.dictionary_path);
  const LongestMatchSegmenter segmenter(dict);

  std::vector<ThemeResult> results(corpora.size());
  std::vector<KeywordSet> keyword_sets;
  for (std::size_t t = 0; t < corpora.size(); ++t) {
    auto& r = results[t];
    r.streams = prepare_streams(corpora[t], segmenter);
    r.keywords = extract_keywords(r.streams, config.keyword_count, corpora[t].theme_id);
    if (auto ov = config.keyword_overrides.find(corpora[t].theme_id); ov != config.keyword_overrides.end())
      r.keywords = apply_override(r.keywords, ov->second.add_term, ov->second.reference_rank);
    keyword_sets.push_back(r.keywords);
  }

  std::optional<EmbeddingModel> shared;
  if (config.scope == EmbedScope::global) {
    std::vector<TokenStream> all;
    for (const auto& r : results) all.insert(all.end(), r.streams.begin(), r.streams.end());
    shared = train(all, merged_keywords(keyword_sets), config.embed);
  }

  const auto opts = config.summary_options();
  for (std::size_t t = 0; t < corpora.size(); ++t) {
    const auto& corpus = corpora[t];
    auto& r = results[t];
    std::optional<EmbeddingModel> own;
    if (!shared) own = train(r.streams, r.keywords, config.embed);
    const EmbeddingModel& model = shared ? *shared : *own;
    r.epoch_loss = model.epoch_loss;

    std::vector<SentenceVector> vectors;
    for (const auto& s : r.streams) {
      try {
        vectors.push_back(sentence_vector(s, model, r.keywords, config.embed.keyword_boost));
      } catch (const Error& e) {
        if (e.code() != "unembeddable_sentence") throw;
        r.skipped_items.push_back(s.item_id);
      }
    }
    if (vectors.size() < 2)
      throw Error("too_few_items", "theme '" + corpus.theme_id + "' has fewer than two embeddable items");
    r.matrix = similarity_matrix(vectors, corpus.theme_id, config.matrix_threads);

    auto& a = r.analysis;
    a.theme_id = corpus.theme_id;
    a.sample_size = corpus.sample_size();
    a.accuracy = corpus.accuracy();
    a.summary = summarize(r.matrix, opts);
    a.representative = representative_pair(r.matrix, config.quantile_method);
    a.pair_values = r.matrix.upper_triangle();
  }
  return results;
}

std::string corpus_digest(std::span<const ResolvedItem> items) {
  std::string canon;
  for (const auto& it : items) canon += resolved_to_json_line(it) + "\n";
  return detail::sha256_hex(canon);
}

FactorTable factor_table_from(std::span<const ThemeCorpus> corpora, std::span<const ThemeResult> results) {
  if (corpora.size() != results.size()) throw Error("summary_mismatch", "corpora and results differ in length");
  FactorTable t;
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    const auto& a = results[i].analysis;
    if (!a.accuracy) throw Error("missing_accuracy", "theme '" + a.theme_id + "' has no correctness judgments");
    t.rows.push_back({a.theme_id, static_cast<double>(a.sample_size), *a.accuracy, a.summary.median,
                      100.0 * a.summary.region75, static_cast<double>(corpora[i].abstract_code),
                      static_cast<double>(corpora[i].focus_code)});
  }
  return t;
}

std::string theme_dir_name(const std::string& theme_id) {
  std::string out;
  for (char c : theme_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

NormReport write_analysis(const std::string& out_dir, std::span<const ThemeCorpus> corpora,
                          std::span<const ThemeResult> results, const PipelineConfig& config,
                          const std::string& digest) {
  const fs::path out(out_dir);
  fs::create_directories(out / "themes");

  std::vector<ThemeAnalysis> analyses;
  for (const auto& r : results) {
    const auto dir = out / "themes" / theme_dir_name(r.analysis.theme_id);
    fs::create_directories(dir);
    json summary = analysis_to_json(r.analysis);
    json kw = json::array();
    for (const auto& e : r.keywords.entries) kw.push_back({e.term, e.weight});
    summary["keywords"] = kw;
    summary["skipped_items"] = r.skipped_items;
    summary["epoch_loss"] = r.epoch_loss;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    std::ostringstream m;
    write_matrix_csv(r.matrix, m);
    write_text(dir / "matrix.csv", m.str());
    emit_histogram(r.analysis.summary, (dir / "histogram.svg").string());
    emit_heatmap(r.matrix, (dir / "heatmap.svg").string(), config.heatmap_floor);
    analyses.push_back(r.analysis);
  }

  std::optional<FactorReport> factors;
  try {
    const auto table = factor_table_from(corpora, results);
    std::ostringstream nt;
    write_norm_table(table, nt);
    write_text(out / "norm_table.csv", nt.str());
    factors = try_factor_report(table);
  } catch (const Error& e) {
    if (e.code() != "missing_accuracy") throw;
  }

  auto rep = build_report(corpora, analyses, std::move(factors), make_provenance(config, digest),
                          config.quantile_method);
  write_reports(out, rep);
  return rep;
}

NormReport rebuild_report(const std::string& out_dir, const PipelineConfig& config) {
  const fs::path out(out_dir);
  const auto themes_dir = out / "themes";
  if (!fs::is_directory(themes_dir)) throw Error("io_error", "no themes directory under " + out_dir);

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(themes_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  std::vector<ThemeAnalysis> analyses;
  std::string digest_src;
  for (const auto& dir : dirs) {
    json j;
    try {
      j = json::parse(read_text(dir / "summary.json"));
    } catch (const json::parse_error& e) {
      throw Error("parse_error", dir.string() + "/summary.json: " + e.what());
    }
    auto a = analysis_from_json(j);
    if (fs::exists(dir / "matrix.csv")) {
      std::istringstream ms(read_text(dir / "matrix.csv"));
      const auto m = read_matrix_csv(ms, a.theme_id);
      a.pair_values = m.upper_triangle();
      emit_heatmap(m, (dir / "heatmap.svg").string(), config.heatmap_floor);
    }
    emit_histogram(a.summary, (dir / "histogram.svg").string());
    digest_src += j.dump() + "\n";
    analyses.push_back(std::move(a));
  }

  std::optional<FactorReport> factors;
  std::string digest = detail::sha256_hex(digest_src);
  if (fs::exists(out / "norm_table.csv")) factors = try_factor_report(load_norm_table((out / "norm_table.csv").string()));
  if (fs::exists(out / "report.json")) {
    try {
      digest = json::parse(read_text(out / "report.json")).at("provenance").at("corpus_sha256").get<std::string>();
    } catch (const json::exception&) {
    }
  }
  auto rep = build_report(analyses, std::move(factors), make_provenance(config, digest), config.quantile_method);
  write_reports(out, rep);
  return rep;
}

}  // namespace cnorm
