#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cnorm/config.hpp"
#include "cnorm/corpus.hpp"
#include "cnorm/error.hpp"
#include "cnorm/pipeline.hpp"

using namespace cnorm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = CNORM_TEST_DATA;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<ThemeCorpus> sample_corpora() {
  const auto resolved = resolve_all(load_corpus(kData + "/sample_corpus.jsonl"));
  return assemble_themes(resolved, load_factors(kData + "/sample_factors.csv"),
                         load_lexicons(kData + "/sample_lexicons.json"));
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CNORM_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("cnorm_pipe_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(PrepareStreams, FoldsAndStrips) {
  ThemeCorpus c;
  ResolvedItem it;
  it.item_id = "x";
  it.reasoning_text = "The Moon, the SUN!";
  c.items = {it};
  const auto s = prepare_streams(c, LongestMatchSegmenter());
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].tokens, (std::vector<std::string>{"the", "moon", "the", "sun"}));
}

TEST(Config, ParsesAndValidates) {
  const auto cfg = PipelineConfig::load(kData + "/sample_config.json");
  EXPECT_EQ(cfg.embed.dim, 24);
  EXPECT_EQ(cfg.embed.seed, 11u);
  EXPECT_EQ(cfg.keyword_overrides.at("boiling").add_term, "evaporation");
  EXPECT_THROW(PipelineConfig::from_json(json{{"embed", {{"epochs", 0}}}}), Error);
  EXPECT_THROW(PipelineConfig::from_json(json{{"embed_scope", "sideways"}}), Error);
  EXPECT_THROW(PipelineConfig::from_json(json{{"quantile_method", "odd"}}), Error);
  const auto echo = cfg.to_json();
  EXPECT_FALSE(echo.contains("endpoint") && echo.at("endpoint").dump().find("CNORM_API_KEY=") != std::string::npos);
}

TEST(AnalyzeCorpora, DeterministicPerThemeResults) {
  auto cfg = PipelineConfig::load(kData + "/sample_config.json");
  cfg.embed.deterministic = true;
  const auto corpora = sample_corpora();
  ASSERT_EQ(corpora.size(), 3u);
  const auto a = analyze_corpora(corpora, cfg);
  const auto b = analyze_corpora(corpora, cfg);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].matrix.values, b[i].matrix.values);
    EXPECT_EQ(a[i].analysis.summary.median, b[i].analysis.summary.median);
    EXPECT_EQ(a[i].matrix.n, corpora[i].sample_size());
    EXPECT_LE(a[i].keywords.entries.size(), 10u);
  }
  EXPECT_TRUE(a[0].keywords.contains("evaporation"));
}

TEST(AnalyzeCorpora, GlobalScopeRuns) {
  auto cfg = PipelineConfig::load(kData + "/sample_config.json");
  cfg.embed.deterministic = true;
  cfg.scope = EmbedScope::global;
  const auto r = analyze_corpora(sample_corpora(), cfg);
  ASSERT_EQ(r.size(), 3u);
  for (const auto& t : r) EXPECT_GE(t.analysis.summary.pair_count, 1u);
}

TEST(AnalyzeCorpora, TooFewItems) {
  ThemeCorpus c;
  c.theme_id = "solo";
  ResolvedItem it;
  it.item_id = "x";
  it.reasoning_text = "only one drawing";
  c.items = {it};
  std::vector<ThemeCorpus> v = {c};
  try {
    analyze_corpora(v, PipelineConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "too_few_items");
  }
}

TEST(ThemeDirName, Sanitizes) {
  EXPECT_EQ(theme_dir_name("Solar eclipse/2"), "Solar_eclipse_2");
  EXPECT_EQ(theme_dir_name(".."), "_..");
}

TEST_F(TempDir, WriteAnalysisLayoutAndRebuild) {
  auto cfg = PipelineConfig::load(kData + "/sample_config.json");
  cfg.embed.deterministic = true;
  const auto corpora = sample_corpora();
  const auto results = analyze_corpora(corpora, cfg);
  const auto rep = write_analysis(dir_.string(), corpora, results, cfg, "digest");
  EXPECT_TRUE(rep.factors.has_value());
  for (const char* f : {"report.txt", "report.json", "norm_table.csv", "factors.json", "factors.txt"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  for (const auto& c : corpora)
    for (const char* f : {"summary.json", "matrix.csv", "histogram.svg", "heatmap.svg"})
      EXPECT_TRUE(fs::exists(dir_ / "themes" / c.theme_id / f)) << c.theme_id << "/" << f;

  const auto before = slurp(dir_ / "report.txt");
  const auto hist = slurp(dir_ / "themes" / "boiling" / "histogram.svg");
  fs::remove(dir_ / "themes" / "boiling" / "histogram.svg");
  rebuild_report(dir_.string(), cfg);
  EXPECT_EQ(slurp(dir_ / "report.txt"), before);
  EXPECT_EQ(slurp(dir_ / "themes" / "boiling" / "histogram.svg"), hist);
}

TEST_F(TempDir, CliResolveCorrelateAndErrors) {
  const auto log = dir_ / "log.txt";
  ASSERT_EQ(run_cli("--out " + (dir_ / "r").string() + " resolve --corpus " + kData + "/sample_corpus.jsonl", log), 0)
      << slurp(log);
  std::ifstream resolved(dir_ / "r" / "resolved.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(resolved, l);) ++lines;
  EXPECT_EQ(lines, 33u);

  ASSERT_EQ(run_cli("--out " + (dir_ / "c").string() + " correlate --table " + kData + "/published_norms.csv", log), 0)
      << slurp(log);
  const auto fj = json::parse(slurp(dir_ / "c" / "factors.json"));
  ASSERT_EQ(fj.at("cells").size(), 9u);
  EXPECT_NEAR(fj.at("cells")[6].at("tau").get<double>(), -0.624, 5e-4);

  EXPECT_NE(run_cli("correlate", log), 0);
  std::ofstream(dir_ / "bad.csv") << "theme_id,sample_size,accuracy,median_sim,region75_pct,abstract_code,focus_code\n"
                                  << "a,1,0.5,0.9,1,1,1\nb,2,0.5,0.9,1,1,1\n";
  EXPECT_EQ(run_cli("--out " + dir_.string() + " correlate --table " + (dir_ / "bad.csv").string(), log), 2);
  EXPECT_NE(slurp(log).find("insufficient_rows"), std::string::npos);
}

TEST_F(TempDir, CliAnalyzeThenReport) {
  const auto log = dir_ / "log.txt";
  const auto out = (dir_ / "a").string();
  const std::string common = "--config " + kData + "/sample_config.json --deterministic --out " + out;
  ASSERT_EQ(run_cli(common + " analyze --corpus " + kData + "/sample_corpus.jsonl --factors " + kData +
                        "/sample_factors.csv --lexicons " + kData + "/sample_lexicons.json",
                    log),
            0)
      << slurp(log);
  const auto report = slurp(fs::path(out) / "report.txt");
  ASSERT_EQ(run_cli(common + " report", log), 0) << slurp(log);
  EXPECT_EQ(slurp(fs::path(out) / "report.txt"), report);
  EXPECT_NE(slurp(log).find("Representation consistency norm"), std::string::npos);
}

TEST_F(TempDir, CliRecognizeWithStub) {
  const auto log = dir_ / "log.txt";
  std::ofstream jobs(dir_ / "jobs.jsonl");
  json stub = json::object();
  const std::vector<std::vector<std::string>> replies = {
      {"sun, moon and earth in a line", "the moon covers the sun"},
      {"sun and moon", "a battery with a bulb", "the moon hides the sun"},
      {"sun", "battery", "steam"}};
  for (std::size_t i = 0; i < replies.size(); ++i) {
    const auto img = (dir_ / ("d" + std::to_string(i) + ".jpg")).string();
    std::ofstream(img, std::ios::binary) << "jpeg" << i;
    jobs << json{{"item_id", "d" + std::to_string(i)}, {"theme_id", "eclipse"}, {"image_path", img}}.dump() << "\n";
    stub[img] = replies[i];
  }
  jobs.close();
  std::ofstream(dir_ / "stub.json") << stub.dump();
  std::ofstream(dir_ / "labels.json")
      << R"({"solar_eclipse":["sun","moon","earth"],"circuit":["battery","bulb"],"boiling":["steam"]})";
  const auto out = (dir_ / "rec").string();
  ASSERT_EQ(run_cli("--out " + out + " recognize --jobs " + (dir_ / "jobs.jsonl").string() + " --labels " +
                        (dir_ / "labels.json").string() + " --stub " + (dir_ / "stub.json").string(),
                    log),
            0)
      << slurp(log);
  std::ifstream recs(fs::path(out) / "records.jsonl");
  std::size_t n = 0;
  for (std::string l; std::getline(recs, l);) ++n;
  EXPECT_EQ(n, 8u);
  std::ifstream res(fs::path(out) / "resolved.jsonl");
  std::vector<json> items;
  for (std::string l; std::getline(res, l);) items.push_back(json::parse(l));
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[1].at("final_label"), "solar_eclipse");
  EXPECT_EQ(items[2].at("excluded"), true);
  EXPECT_TRUE(fs::exists(fs::path(out) / "transcript.jsonl"));
}
