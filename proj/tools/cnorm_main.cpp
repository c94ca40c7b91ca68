// cnorm: representation-consistency norm pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cnorm/config.hpp"
#include "cnorm/corpus.hpp"
#include "cnorm/error.hpp"
#include "cnorm/llmclient.hpp"
#include "cnorm/pipeline.hpp"
#include "cnorm/report.hpp"
#include "cnorm/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "cnorm-out";
  bool deterministic = false;
};

cnorm::PipelineConfig load_config(const GlobalOptions& g) {
  auto cfg = g.config_path.empty() ? cnorm::PipelineConfig{} : cnorm::PipelineConfig::load(g.config_path);
  if (g.seed) cfg.embed.seed = *g.seed;
  if (g.deterministic) cfg.embed.deterministic = true;
  cfg.validate();
  return cfg;
}

int run_resolve(const GlobalOptions& g, const std::string& corpus_path) {
  const auto records = cnorm::load_corpus(corpus_path);
  const auto resolved = cnorm::resolve_all(records);
  fs::create_directories(g.out_dir);
  const auto path = (fs::path(g.out_dir) / "resolved.jsonl").string();
  cnorm::write_resolved(path, resolved);
  std::size_t excluded = 0;
  for (const auto& r : resolved) excluded += r.excluded;
  std::cout << fmt::format("{} records, {} items, {} accepted, {} excluded -> {}\n", records.size(),
                           resolved.size(), resolved.size() - excluded, excluded, path);
  return 0;
}

int run_analyze(const GlobalOptions& g, const std::string& corpus_path, const std::string& factors_path,
                const std::string& lexicons_path) {
  const auto cfg = load_config(g);
  const auto records = cnorm::load_corpus(corpus_path);
  const auto resolved = cnorm::resolve_all(records);
  const auto factors = cnorm::load_factors(factors_path);
  const auto lexicons = lexicons_path.empty() ? std::map<std::string, cnorm::ThemeLexicon>{}
                                              : cnorm::load_lexicons(lexicons_path);
  const auto corpora = cnorm::assemble_themes(resolved, factors, lexicons);
  if (corpora.empty()) throw cnorm::Error("empty_input", "no theme has accepted items");

  const auto results = cnorm::analyze_corpora(corpora, cfg);
  const auto report = cnorm::write_analysis(g.out_dir, corpora, results, cfg, cnorm::corpus_digest(resolved));
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& a = results[i].analysis;
    std::cout << fmt::format("{}: n={} {}", a.theme_id, a.sample_size, cnorm::format_theme_line(a.summary));
    if (!results[i].skipped_items.empty())
      std::cout << fmt::format(" ({} unembeddable items skipped)", results[i].skipped_items.size());
    std::cout << '\n';
  }
  if (!report.factors) std::cout << "factor grid skipped (needs >= 3 themes with correctness judgments)\n";
  std::cout << "wrote " << (fs::path(g.out_dir) / "report.txt").string() << '\n';
  return 0;
}

int run_correlate(const GlobalOptions& g, const std::string& table_path) {
  const auto table = cnorm::load_norm_table(table_path);
  const auto rep = cnorm::factor_analysis(table);
  fs::create_directories(g.out_dir);
  std::ofstream(fs::path(g.out_dir) / "factors.json", std::ios::binary)
      << cnorm::factor_report_to_json(rep).dump(2) << '\n';
  std::ofstream txt(fs::path(g.out_dir) / "factors.txt", std::ios::binary);
  cnorm::write_factor_text(rep, txt);
  cnorm::write_factor_text(rep, std::cout);
  return 0;
}

int run_report(const GlobalOptions& g) {
  const auto cfg = load_config(g);
  const auto rep = cnorm::rebuild_report(g.out_dir, cfg);
  cnorm::write_report_text(rep, std::cout);
  return 0;
}

int run_recognize(const GlobalOptions& g, const std::string& jobs_path, const std::string& labels_path,
                  const std::string& stub_path) {
  const auto cfg = load_config(g);
  std::vector<cnorm::ImageJob> jobs;
  {
    std::ifstream in(jobs_path);
    if (!in) throw cnorm::Error("io_error", "cannot open " + jobs_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = json::parse(line);
        jobs.push_back({j.at("item_id"), j.at("theme_id"), j.at("image_path")});
      } catch (const json::exception& e) {
        throw cnorm::Error("parse_error", fmt::format("jobs line {}: {}", lineno, e.what()));
      }
    }
  }
  cnorm::LabelLexicons labels;
  {
    std::ifstream in(labels_path);
    if (!in) throw cnorm::Error("io_error", "cannot open " + labels_path);
    labels = cnorm::parse_label_lexicons(json::parse(in));
  }
  std::shared_ptr<cnorm::Transport> transport;
  if (stub_path.empty()) {
    transport = std::make_shared<cnorm::HttpTransport>(cfg.endpoint);
  } else {
    transport = cnorm::StubTransport::load(stub_path);
  }
  cnorm::RecognitionClient client(cfg.endpoint, transport, labels);
  const auto outcomes = client.run_batch(jobs);

  fs::create_directories(g.out_dir);
  const fs::path out(g.out_dir);
  std::ofstream records(out / "records.jsonl", std::ios::binary);
  std::vector<cnorm::ResolvedItem> resolved;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (const auto& r : outcomes[i].records) records << cnorm::record_to_json_line(r) << '\n';
    if (outcomes[i].resolved) resolved.push_back(*outcomes[i].resolved);
    if (!outcomes[i].error.empty()) {
      ++failures;
      std::cerr << jobs[i].item_id << ": " << outcomes[i].error << '\n';
    }
  }
  cnorm::write_resolved((out / "resolved.jsonl").string(), resolved);
  client.write_transcript((out / "transcript.jsonl").string());
  std::cout << fmt::format("{} images, {} resolved, {} failed\n", jobs.size(), resolved.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representation-consistency norm: resolve, analyze, correlate, report, recognize"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the embedding seed");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Single-worker bit-reproducible training");

  std::string corpus, factors, lexicons, table, jobs, labels, stub;

  auto* resolve = app.add_subcommand("resolve", "Apply the 2-of-3 recognition protocol");
  resolve->add_option("--corpus", corpus, "Recognition records (JSONL)")->required()->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "Per-theme embeddings, similarity matrices and summaries");
  analyze->add_option("--corpus", corpus, "Recognition records (JSONL)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--factors", factors, "theme_id,abstract_code,focus_code table")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--lexicons", lexicons, "Theme lexicons (JSON)")->check(CLI::ExistingFile);

  auto* correlate = app.add_subcommand("correlate", "Kendall tau_b factor grid from a norm table");
  correlate->add_option("--table", table, "Norm table CSV")->required()->check(CLI::ExistingFile);

  app.add_subcommand("report", "Rebuild report and figures from an analyze output directory");

  auto* recognize = app.add_subcommand("recognize", "Run the recognition protocol against a vision endpoint");
  recognize->add_option("--jobs", jobs, "JSONL of {item_id, theme_id, image_path}")
      ->required()
      ->check(CLI::ExistingFile);
  recognize->add_option("--labels", labels, "Label lexicons (JSON)")->required()->check(CLI::ExistingFile);
  recognize->add_option("--stub", stub, "Canned responses instead of a live endpoint")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*resolve) return run_resolve(g, corpus);
    if (*analyze) return run_analyze(g, corpus, factors, lexicons);
    if (*correlate) return run_correlate(g, table);
    if (*recognize) return run_recognize(g, jobs, labels, stub);
    return run_report(g);
  } catch (const cnorm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
