#include "cnorm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cnorm/error.hpp"
#include "cnorm/simdist.hpp"

namespace cnorm {

namespace {

int sign(double a, double b) { return (a > b) - (a < b); }

void check_pair_input(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("length_mismatch", "x and y differ in length");
  if (x.size() < 2) throw Error("empty_input", "need at least two observations");
}

// Sizes of groups of equal values.
std::vector<double> tie_groups(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  std::vector<double> groups;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    if (j - i > 1) groups.push_back(static_cast<double>(j - i));
    i = j;
  }
  return groups;
}

std::int64_t exact_extreme_count(std::span<const double> x, std::span<const double> y, std::int64_t observed,
                                 std::int64_t& total) {
  const std::size_t n = x.size();
  std::vector<int> sx(n * n), sy(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      sx[i * n + j] = sign(x[i], x[j]);
      sy[i * n + j] = sign(y[i], y[j]);
    }
  const std::int64_t target = std::abs(observed);

  // One partition per leading element; counts are integers, so the merge is
  // independent of scheduling.
  std::vector<std::int64_t> extreme(n, 0), seen(n, 0);
  auto run = [&](std::size_t lead) {
    std::vector<std::size_t> perm(n);
    perm[0] = lead;
    std::size_t k = 1;
    for (std::size_t v = 0; v < n; ++v)
      if (v != lead) perm[k++] = v;
    do {
      std::int64_t s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const int* rx = &sx[i * n];
        const int* ry = &sy[perm[i] * n];
        for (std::size_t j = i + 1; j < n; ++j) s += rx[j] * ry[perm[j]];
      }
      if (std::abs(s) >= target) ++extreme[lead];
      ++seen[lead];
    } while (std::next_permutation(perm.begin() + 1, perm.end()));
  };
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, n);
  if (workers == 1) {
    for (std::size_t lead = 0; lead < n; ++lead) run(lead);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t lead = w; lead < n; lead += workers) run(lead);
      });
  }
  total = std::accumulate(seen.begin(), seen.end(), std::int64_t{0});
  return std::accumulate(extreme.begin(), extreme.end(), std::int64_t{0});
}

std::vector<std::string> lexicon_term_tokens(const std::string& term, const Segmenter& seg) {
  try {
    return normalize_tokens(strip_punctuation(tokenize(term, seg)));
  } catch (const Error&) {
    return {};
  }
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

KappaResult kappa_point(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t categories,
                        std::span<const std::size_t> idx) {
  std::vector<double> pa(categories, 0.0), pb(categories, 0.0);
  double agree = 0.0;
  for (auto i : idx) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double m = static_cast<double>(idx.size());
  KappaResult r;
  r.observed_agreement = agree / m;
  // Counts stay integral, so kappa = (m*agree - sum pa*pb) / (m^2 - sum pa*pb)
  // is one rounding away from the rational value.
  double chance = 0.0;
  std::size_t used_a = 0, used_b = 0;
  for (std::size_t c = 0; c < categories; ++c) {
    chance += pa[c] * pb[c];
    used_a += pa[c] > 0;
    used_b += pb[c] > 0;
  }
  r.expected_agreement = chance / (m * m);
  r.degenerate = used_a == 1 && used_b == 1;
  if (r.degenerate) {
    r.kappa = agree == m ? 1.0 : 0.0;
  } else {
    r.kappa = (m * agree - chance) / (m * m - chance);
  }
  return r;
}

}  // namespace

std::string to_string(PValueMethod m) {
  return m == PValueMethod::exact_permutation ? "exact_permutation" : "normal_approx";
}

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
  check_pair_input(x, y);
  PairCounts c;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int p = sign(x[i], x[j]) * sign(y[i], y[j]);
      c.concordant += p > 0;
      c.discordant += p < 0;
      c.ties_x += x[i] == x[j];
      c.ties_y += y[i] == y[j];
    }
  c.pairs = static_cast<std::int64_t>(n * (n - 1) / 2);
  return c;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  const auto c = count_pairs(x, y);
  if (c.ties_x == c.pairs || c.ties_y == c.pairs) throw Error("degenerate_ranking", "a variable is constant");
  const double denom = std::sqrt(static_cast<double>(c.pairs - c.ties_x) * static_cast<double>(c.pairs - c.ties_y));
  return std::clamp(static_cast<double>(c.concordant - c.discordant) / denom, -1.0, 1.0);
}

double kendall_p_normal(std::span<const double> x, std::span<const double> y) {
  const auto c = count_pairs(x, y);
  if (c.ties_x == c.pairs || c.ties_y == c.pairs) throw Error("degenerate_ranking", "a variable is constant");
  const double n = static_cast<double>(x.size());
  auto sum = [](const std::vector<double>& g, auto f) {
    double s = 0.0;
    for (double t : g) s += f(t);
    return s;
  };
  const auto tx = tie_groups(x), ty = tie_groups(y);
  const double v0 = n * (n - 1) * (2 * n + 5);
  const double vt = sum(tx, [](double t) { return t * (t - 1) * (2 * t + 5); });
  const double vu = sum(ty, [](double t) { return t * (t - 1) * (2 * t + 5); });
  const double v1 = sum(tx, [](double t) { return t * (t - 1); }) * sum(ty, [](double t) { return t * (t - 1); }) /
                    (2 * n * (n - 1));
  const double v2 = n > 2 ? sum(tx, [](double t) { return t * (t - 1) * (t - 2); }) *
                                sum(ty, [](double t) { return t * (t - 1) * (t - 2); }) / (9 * n * (n - 1) * (n - 2))
                          : 0.0;
  const double var = (v0 - vt - vu) / 18.0 + v1 + v2;
  const double z = static_cast<double>(c.concordant - c.discordant) / std::sqrt(var);
  return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

TauResult kendall_p(std::span<const double> x, std::span<const double> y, std::size_t exact_limit) {
  TauResult r;
  r.tau = kendall_tau_b(x, y);
  r.n = x.size();
  if (r.n <= exact_limit) {
    const auto c = count_pairs(x, y);
    std::int64_t total = 0;
    const auto extreme = exact_extreme_count(x, y, c.concordant - c.discordant, total);
    r.method = PValueMethod::exact_permutation;
    r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  } else {
    r.method = PValueMethod::normal_approx;
    r.p_value = kendall_p_normal(x, y);
  }
  return r;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error("empty_input", "mean of no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double mean(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw Error("empty_input", "mean of no values");
  if (weights.size() != values.size()) throw Error("length_mismatch", "weights");
  double sw = 0.0, swv = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw Error("invalid_argument", "negative weight");
    sw += weights[i];
    swv += weights[i] * values[i];
  }
  if (sw == 0.0) throw Error("zero_weights", "all weights are zero");
  return swv / sw;
}

RateResult reproduction_rate(std::span<const std::string> texts, const std::set<std::string>& lexicon,
                             const Segmenter& segmenter) {
  if (texts.empty()) throw Error("empty_input", "no texts");
  if (lexicon.empty()) throw Error("empty_lexicon", "");
  std::vector<std::vector<std::string>> needles;
  for (const auto& term : lexicon) needles.push_back(lexicon_term_tokens(term, segmenter));

  RateResult r;
  for (const auto& text : texts) {
    std::vector<std::string> toks;
    try {
      toks = normalize_tokens(strip_punctuation(tokenize(text, segmenter)));
    } catch (const Error&) {
      continue;  // blank text mentions nothing
    }
    if (std::any_of(needles.begin(), needles.end(), [&](const auto& n) { return contains_sequence(toks, n); }))
      ++r.count;
  }
  r.rate = static_cast<double>(r.count) / static_cast<double>(texts.size());
  return r;
}

double object_mention_rate(std::span<const ThemeTexts> themes, const Segmenter& segmenter) {
  if (themes.empty()) throw Error("empty_input", "no themes");
  std::vector<double> rates, weights;
  for (const auto& t : themes) {
    rates.push_back(reproduction_rate(t.texts, t.object_lexicon, segmenter).rate);
    weights.push_back(t.sample_size);
  }
  return mean(rates, weights);
}

KappaResult cohen_kappa(std::span<const std::string> ratings_a, std::span<const std::string> ratings_b,
                        const BootstrapOptions& boot) {
  if (ratings_a.size() != ratings_b.size()) throw Error("length_mismatch", "rating lists differ in length");
  if (ratings_a.size() < 2) throw Error("empty_input", "need at least two rated items");

  std::map<std::string, std::size_t> cats;
  for (const auto& r : ratings_a) cats.emplace(r, 0);
  for (const auto& r : ratings_b) cats.emplace(r, 0);
  std::size_t next = 0;
  for (auto& [_, id] : cats) id = next++;

  const std::size_t m = ratings_a.size();
  std::vector<std::size_t> a(m), b(m), all(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = cats.at(ratings_a[i]);
    b[i] = cats.at(ratings_b[i]);
    all[i] = i;
  }
  KappaResult r = kappa_point(a, b, cats.size(), all);
  r.ci_low = r.ci_high = r.kappa;
  if (boot.resamples == 0) return r;

  std::mt19937_64 rng(boot.seed);
  std::vector<double> samples;
  samples.reserve(boot.resamples);
  std::vector<std::size_t> idx(m);
  for (std::size_t s = 0; s < boot.resamples; ++s) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng() % m);
    samples.push_back(kappa_point(a, b, cats.size(), idx).kappa);
  }
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - boot.level) / 2.0;
  r.ci_low = quantile(samples, tail);
  r.ci_high = quantile(samples, 1.0 - tail);
  return r;
}

const FactorCell& FactorReport::cell(std::string_view factor, std::string_view metric) const {
  for (const auto& row : cells)
    for (const auto& c : row)
      if (c.factor == factor && c.metric == metric) return c;
  throw Error("invalid_argument", "no cell " + std::string(factor) + "/" + std::string(metric));
}

FactorReport factor_analysis(const FactorTable& table) {
  if (table.rows.size() < 3) throw Error("insufficient_rows", "factor analysis needs at least 3 themes");
  auto column = [&](auto member) {
    std::vector<double> v;
    for (const auto& r : table.rows) v.push_back(r.*member);
    return v;
  };
  const std::array factors = {column(&FactorRowData::sample_size), column(&FactorRowData::abstract_code),
                              column(&FactorRowData::focus_code)};
  const std::array metrics = {column(&FactorRowData::accuracy), column(&FactorRowData::median_sim),
                              column(&FactorRowData::region75)};
  FactorReport rep;
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t m = 0; m < 3; ++m) {
      auto& c = rep.cells[f][m];
      c.factor = kFactorNames[f];
      c.metric = kMetricNames[m];
      try {
        c.result = kendall_p(factors[f], metrics[m]);
        c.moderate = std::abs(c.result->tau) > kModerateTau;
        c.significant = c.result->p_value < kSignificanceLevel;
      } catch (const Error& e) {
        c.error = e.code();
      }
    }
  return rep;
}

FactorTable parse_norm_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("parse_error", "norm table: empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split(line);
  auto col = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("parse_error", std::string("norm table lacks column ") + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto ci = col("theme_id"), cn = col("sample_size"), ca = col("accuracy"), cm = col("median_sim"),
             cr = col("region75_pct"), cab = col("abstract_code"), cf = col("focus_code");
  FactorTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() < header.size())
      throw Error("parse_error", "norm table line " + std::to_string(lineno) + ": too few columns");
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        double v = std::stod(cells[i], &used);
        if (used != cells[i].size() || !std::isfinite(v)) throw std::invalid_argument(cells[i]);
        return v;
      } catch (const std::exception&) {
        throw Error("parse_error",
                    "norm table line " + std::to_string(lineno) + ": '" + cells[i] + "' is not a finite number");
      }
    };
    FactorRowData r;
    r.theme_id = cells[ci];
    r.sample_size = num(cn);
    r.accuracy = num(ca);
    r.median_sim = num(cm);
    r.region75 = num(cr);
    r.abstract_code = num(cab);
    r.focus_code = num(cf);
    for (const auto& prev : t.rows)
      if (prev.theme_id == r.theme_id) throw Error("parse_error", "norm table: duplicate theme " + r.theme_id);
    t.rows.push_back(r);
  }
  return t;
}

FactorTable load_norm_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  return parse_norm_table(in);
}

void write_norm_table(const FactorTable& table, std::ostream& out) {
  out << "theme_id,sample_size,accuracy,median_sim,region75_pct,abstract_code,focus_code\n";
  for (const auto& r : table.rows)
    out << fmt::format("{},{},{},{},{},{},{}\n", r.theme_id, r.sample_size, r.accuracy, r.median_sim, r.region75,
                       r.abstract_code, r.focus_code);
}

}  // namespace cnorm
