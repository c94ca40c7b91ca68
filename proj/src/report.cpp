#include "cnorm/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "cnorm/error.hpp"
#include "svg.hpp"

namespace cnorm {

using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  out << content;
  if (!out) throw Error("io_error", "failed writing " + path);
}

std::string trim_decimals(double v, int places) {
  auto s = fmt::format("{:.{}f}", v, places);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

double median_of(std::vector<double> v, QuantileMethod method) {
  std::sort(v.begin(), v.end());
  return quantile(v, 0.5, method);
}

}  // namespace

NormReport build_report(std::span<const ThemeAnalysis> analyses, std::optional<FactorReport> factors,
                        Provenance provenance, QuantileMethod method) {
  if (analyses.empty()) throw Error("empty_input", "report needs at least one theme");
  NormReport rep;
  rep.factors = std::move(factors);
  rep.provenance = std::move(provenance);

  std::vector<double> accuracies, medians, regions, sizes, pooled;
  bool can_pool = true;
  for (const auto& a : analyses) {
    for (const auto& r : rep.rows)
      if (r.theme_id == a.theme_id) throw Error("duplicate_theme", a.theme_id);
    ThemeRow row;
    row.theme_id = a.theme_id;
    row.sample_size = a.sample_size;
    row.accuracy = a.accuracy;
    row.median_sim = a.summary.median;
    row.region75_pct = 100.0 * a.summary.region75;
    row.frac_below_pct = 100.0 * a.summary.frac_below;
    row.representative = a.representative;
    rep.rows.push_back(row);

    rep.overall.total_items += a.sample_size;
    if (a.accuracy) accuracies.push_back(*a.accuracy);
    medians.push_back(row.median_sim);
    regions.push_back(row.region75_pct);
    sizes.push_back(static_cast<double>(a.sample_size));
    if (a.pair_values.empty()) can_pool = false;
    pooled.insert(pooled.end(), a.pair_values.begin(), a.pair_values.end());
  }

  auto& o = rep.overall;
  if (!accuracies.empty()) o.mean_accuracy = mean(accuracies);
  o.mean_of_medians = mean(medians);
  o.median_of_medians = median_of(medians, method);
  o.mean_region75_pct = mean(regions);
  o.weighted_mean_region75_pct =
      std::all_of(sizes.begin(), sizes.end(), [](double s) { return s == 0.0; }) ? o.mean_region75_pct
                                                                                   : mean(regions, sizes);
  if (can_pool) {
    std::sort(pooled.begin(), pooled.end());
    o.pooled_median = quantile(pooled, 0.5, method);
    o.pooled_region75_pct = 100.0 * (quantile(pooled, 0.875, method) - quantile(pooled, 0.125, method));
  }
  return rep;
}

NormReport build_report(std::span<const ThemeCorpus> corpora, std::span<const ThemeAnalysis> analyses,
                        std::optional<FactorReport> factors, Provenance provenance, QuantileMethod method) {
  if (corpora.size() != analyses.size())
    throw Error("summary_mismatch", fmt::format("{} corpora but {} summaries", corpora.size(), analyses.size()));
  std::vector<ThemeAnalysis> merged(analyses.begin(), analyses.end());
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    if (corpora[i].theme_id != merged[i].theme_id)
      throw Error("summary_mismatch", "corpus '" + corpora[i].theme_id + "' vs summary '" + merged[i].theme_id + "'");
    merged[i].sample_size = corpora[i].sample_size();
    merged[i].accuracy = corpora[i].accuracy();
  }
  return build_report(merged, std::move(factors), std::move(provenance), method);
}

std::string format_theme_line(const DistributionSummary& s) {
  return fmt::format("median {}, 75% Region {:.2f} (% of [0,1])", trim_decimals(s.median, 4), 100.0 * s.region75);
}

void write_factor_text(const FactorReport& report, std::ostream& out) {
  out << fmt::format("{:<15}", "factor");
  for (const auto* m : kMetricNames) out << fmt::format("{:>26}", m);
  out << '\n';
  for (const auto& row : report.cells) {
    out << fmt::format("{:<15}", row[0].factor);
    for (const auto& c : row) {
      std::string cell;
      if (c.result) {
        cell = fmt::format("{:+.3f} (p={:.4f}){}{}", c.result->tau, c.result->p_value, c.moderate ? " M" : "",
                           c.significant ? " *" : "");
      } else {
        cell = c.error;
      }
      out << fmt::format("{:>26}", cell);
    }
    out << '\n';
  }
  out << "M = |tau| > 0.4 (moderate or above), * = p < 0.05\n";
}

void write_report_text(const NormReport& report, std::ostream& out) {
  out << "Representation consistency norm\n";
  out << "===============================\n\n";
  out << fmt::format("{:<28} {:>6} {:>9} {:>8} {:>13} {:>9}  {}\n", "theme", "n", "accuracy", "median",
                     "75%Region(%)", "<0.8(%)", "representative pair");
  for (const auto& r : report.rows) {
    const auto acc = r.accuracy ? fmt::format("{:.3f}", *r.accuracy) : std::string("n/a");
    out << fmt::format("{:<28} {:>6} {:>9} {:>8.4f} {:>13.2f} {:>9.1f}  {} / {} ({:.4f})\n", r.theme_id,
                       r.sample_size, acc, r.median_sim, r.region75_pct, r.frac_below_pct, r.representative.first,
                       r.representative.second, r.representative.similarity);
  }
  const auto& o = report.overall;
  out << "\nOverall\n";
  out << fmt::format("  items: {}\n", o.total_items);
  out << "  mean accuracy (unweighted): "
      << (o.mean_accuracy ? fmt::format("{:.1f}%", 100.0 * *o.mean_accuracy) : std::string("n/a")) << '\n';
  out << fmt::format("  median similarity: pooled {} | mean of themes {:.4f} | median of themes {:.4f}\n",
                     o.pooled_median ? fmt::format("{:.4f}", *o.pooled_median) : std::string("n/a"),
                     o.mean_of_medians, o.median_of_medians);
  out << fmt::format(
      "  75% Region (% of [0,1]): pooled {} | mean of themes {:.2f} | sample-weighted mean {:.2f}\n",
      o.pooled_region75_pct ? fmt::format("{:.2f}", *o.pooled_region75_pct) : std::string("n/a"),
      o.mean_region75_pct, o.weighted_mean_region75_pct);

  if (report.factors) {
    out << "\nFactor correlations (Kendall tau_b)\n";
    write_factor_text(*report.factors, out);
  }

  const auto& p = report.provenance;
  out << "\nProvenance\n";
  out << fmt::format("  tool: {}\n  seed: {}\n  deterministic: {}\n  corpus sha256: {}\n  config: {}\n", p.tool,
                     p.seed, p.deterministic ? "yes" : "no", p.corpus_digest, p.config.dump());
}

json factor_report_to_json(const FactorReport& report) {
  json cells = json::array();
  for (const auto& row : report.cells)
    for (const auto& c : row) {
      json j = {{"factor", c.factor}, {"metric", c.metric}};
      if (c.result) {
        j["tau"] = c.result->tau;
        j["p"] = c.result->p_value;
        j["method"] = to_string(c.result->method);
        j["n"] = c.result->n;
        j["moderate"] = c.moderate;
        j["significant"] = c.significant;
      } else {
        j["error"] = c.error;
      }
      cells.push_back(j);
    }
  return {{"cells", cells}, {"moderate_threshold", kModerateTau}, {"significance_level", kSignificanceLevel}};
}

json report_to_json(const NormReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"theme_id", r.theme_id},
                    {"sample_size", r.sample_size},
                    {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
                    {"median_sim", r.median_sim},
                    {"region75_pct", r.region75_pct},
                    {"frac_below_pct", r.frac_below_pct},
                    {"representative_pair",
                     {{"first", r.representative.first},
                      {"second", r.representative.second},
                      {"similarity", r.representative.similarity}}}});
  }
  const auto& o = report.overall;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"themes", rows},
            {"overall",
             {{"total_items", o.total_items},
              {"mean_accuracy", opt(o.mean_accuracy)},
              {"mean_of_medians", o.mean_of_medians},
              {"median_of_medians", o.median_of_medians},
              {"mean_region75_pct", o.mean_region75_pct},
              {"weighted_mean_region75_pct", o.weighted_mean_region75_pct},
              {"pooled_median", opt(o.pooled_median)},
              {"pooled_region75_pct", opt(o.pooled_region75_pct)}}},
            {"provenance",
             {{"tool", report.provenance.tool},
              {"seed", report.provenance.seed},
              {"deterministic", report.provenance.deterministic},
              {"corpus_sha256", report.provenance.corpus_digest},
              {"config", report.provenance.config}}}};
  j["factors"] = report.factors ? factor_report_to_json(*report.factors) : json(nullptr);
  return j;
}

json analysis_to_json(const ThemeAnalysis& a) {
  const auto& s = a.summary;
  json hist = json::array();
  for (const auto& b : s.histogram) hist.push_back({b.lo, b.hi, b.count});
  return {{"theme_id", a.theme_id},
          {"sample_size", a.sample_size},
          {"accuracy", a.accuracy ? json(*a.accuracy) : json(nullptr)},
          {"pair_count", s.pair_count},
          {"min", s.min},
          {"max", s.max},
          {"median", s.median},
          {"q125", s.q125},
          {"q875", s.q875},
          {"region75", s.region75},
          {"frac_below", s.frac_below},
          {"below_threshold", s.below_threshold},
          {"histogram", hist},
          {"representative_pair",
           {{"first", a.representative.first},
            {"second", a.representative.second},
            {"similarity", a.representative.similarity}}}};
}

ThemeAnalysis analysis_from_json(const json& j) {
  try {
    ThemeAnalysis a;
    a.theme_id = j.at("theme_id").get<std::string>();
    a.sample_size = j.at("sample_size").get<std::size_t>();
    if (!j.at("accuracy").is_null()) a.accuracy = j.at("accuracy").get<double>();
    auto& s = a.summary;
    s.theme_id = a.theme_id;
    s.pair_count = j.at("pair_count").get<std::size_t>();
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.median = j.at("median").get<double>();
    s.q125 = j.at("q125").get<double>();
    s.q875 = j.at("q875").get<double>();
    s.region75 = j.at("region75").get<double>();
    s.frac_below = j.at("frac_below").get<double>();
    s.below_threshold = j.at("below_threshold").get<double>();
    for (const auto& b : j.at("histogram")) s.histogram.push_back({b.at(0), b.at(1), b.at(2)});
    const auto& rp = j.at("representative_pair");
    a.representative = {rp.at("first"), rp.at("second"), rp.at("similarity")};
    return a;
  } catch (const json::exception& e) {
    throw Error("parse_error", std::string("summary: ") + e.what());
  }
}

std::string render_histogram(const DistributionSummary& summary) {
  if (summary.histogram.empty()) throw Error("empty_input", "histogram has no bins");
  constexpr double W = 640, H = 400, left = 70, right = 610, top = 50, bottom = 340;
  detail::SvgWriter svg(W, H);
  svg.comment(fmt::format("theme={} pairs={}", summary.theme_id, summary.pair_count));

  const double lo = summary.histogram.front().lo, hi = summary.histogram.back().hi;
  std::size_t max_count = 0;
  for (const auto& b : summary.histogram) max_count = std::max(max_count, b.count);
  const double ymax = static_cast<double>(std::max<std::size_t>(max_count, 1));
  auto sx = [&](double v) { return left + (v - lo) / (hi - lo) * (right - left); };
  auto sy = [&](double c) { return bottom - c / ymax * (bottom - top); };

  svg.text(W / 2, 28, summary.theme_id + ": pairwise semantic similarity", 15, "middle");
  for (const auto& b : summary.histogram) {
    if (b.count == 0) continue;
    const double x0 = sx(b.lo), x1 = sx(b.hi), y = sy(static_cast<double>(b.count));
    svg.rect(x0, y, std::max(x1 - x0, 0.5), bottom - y, "#4c72b0", "#2a4a7f");
  }
  svg.line(left, bottom, right, bottom, "#000000");
  svg.line(left, bottom, left, top, "#000000");
  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5.0;
    svg.line(sx(v), bottom, sx(v), bottom + 5, "#000000");
    svg.text(sx(v), bottom + 20, fmt::format("{:.2f}", v), 11, "middle");
  }
  for (int t = 0; t <= 4; ++t) {
    const double c = ymax * t / 4.0;
    svg.line(left - 5, sy(c), left, sy(c), "#000000");
    svg.text(left - 8, sy(c) + 4, trim_decimals(c, 1), 11, "end");
  }
  svg.text((left + right) / 2, H - 18, "semantic similarity", 13, "middle");
  svg.text(20, (top + bottom) / 2, "pair count", 13, "middle", -90);

  if (summary.frac_below > 0.0) {
    const double thr = summary.below_threshold;
    if (thr > lo && thr < hi) svg.line(sx(thr), top, sx(thr), bottom, "#c44e52", 1.0);
    svg.text(left + 10, top + 16,
             fmt::format("{:.1f}% < {}", 100.0 * summary.frac_below, trim_decimals(thr, 6)), 13, "start");
  }
  return svg.finish();
}

void emit_histogram(const DistributionSummary& summary, const std::string& path) {
  write_file(path, render_histogram(summary));
}

std::string render_heatmap(const SimilarityMatrix& matrix, double display_floor) {
  if (matrix.n < 2) throw Error("empty_input", "heatmap needs n >= 2");
  if (!(display_floor < 1.0)) throw Error("invalid_argument", "display floor must be below 1");
  constexpr double grid = 480, left = 40, top = 50;
  const double cell = grid / static_cast<double>(matrix.n);
  const double W = left + grid + 110, H = top + grid + 40;
  detail::SvgWriter svg(W, H);
  svg.comment(fmt::format("theme={} n={} floor={}", matrix.theme_id, matrix.n, display_floor));
  svg.text(left + grid / 2, 28, matrix.theme_id + ": similarity matrix", 15, "middle");

  auto color_of = [&](double v) -> std::string {
    if (v < display_floor) return kBelowFloorColor;
    return detail::hex_color(detail::heat_color((v - display_floor) / (1.0 - display_floor)));
  };
  // Runs of equal colour within a row are merged into one rect.
  for (std::size_t i = 0; i < matrix.n; ++i) {
    std::size_t j = 0;
    while (j < matrix.n) {
      const auto c = color_of(matrix.at(i, j));
      std::size_t k = j + 1;
      while (k < matrix.n && color_of(matrix.at(i, k)) == c) ++k;
      svg.rect(left + cell * static_cast<double>(j), top + cell * static_cast<double>(i),
               cell * static_cast<double>(k - j), cell, c);
      j = k;
    }
  }
  svg.rect(left, top, grid, grid, "none", "#000000");

  const double lx = left + grid + 20, lh = grid * 0.6;
  constexpr int steps = 20;
  for (int s = 0; s < steps; ++s) {
    const double t = (s + 0.5) / steps;
    svg.rect(lx, top + lh * (1.0 - static_cast<double>(s + 1) / steps), 18, lh / steps,
             detail::hex_color(detail::heat_color(t)));
  }
  svg.text(lx + 24, top + 10, "1.00", 11);
  svg.text(lx + 24, top + lh, fmt::format("{:.2f}", display_floor), 11);
  svg.rect(lx, top + lh + 20, 18, 14, kBelowFloorColor, "#000000");
  svg.text(lx + 24, top + lh + 31, fmt::format("< {:.2f}", display_floor), 11);
  return svg.finish();
}

void emit_heatmap(const SimilarityMatrix& matrix, const std::string& path, double display_floor) {
  write_file(path, render_heatmap(matrix, display_floor));
}

}  // namespace cnorm
