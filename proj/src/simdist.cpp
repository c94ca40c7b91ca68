#include "cnorm/simdist.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cnorm/error.hpp"

namespace cnorm {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> SimilarityMatrix::upper_triangle() const {
  std::vector<double> out;
  out.reserve(pair_count());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(at(i, j));
  return out;
}

QuantileMethod parse_quantile_method(const std::string& name) {
  if (name == "linear") return QuantileMethod::linear;
  if (name == "lower") return QuantileMethod::lower;
  if (name == "higher") return QuantileMethod::higher;
  if (name == "nearest") return QuantileMethod::nearest;
  throw Error("invalid_config", "unknown quantile method '" + name + "'");
}

std::string to_string(QuantileMethod m) {
  switch (m) {
    case QuantileMethod::lower: return "lower";
    case QuantileMethod::higher: return "higher";
    case QuantileMethod::nearest: return "nearest";
    case QuantileMethod::linear: break;
  }
  return "linear";
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("dimension_mismatch", "cosine");
  const double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) throw Error("zero_norm", "");
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d += u[i] * v[i];
  return std::clamp(d / (nu * nv), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(std::span<const SentenceVector> vectors, std::string theme_id, unsigned threads) {
  if (vectors.size() < 2) throw Error("empty_input", "need at least two vectors");
  SimilarityMatrix m;
  m.theme_id = std::move(theme_id);
  m.n = vectors.size();
  m.values.assign(m.n * m.n, 0.0);
  for (const auto& v : vectors) {
    if (norm2(v.vector) == 0.0) throw Error("zero_norm", "item '" + v.item_id + "'");
    m.item_ids.push_back(v.item_id);
  }

  auto fill_rows = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < m.n; i += stride) {
      m.values[i * m.n + i] = 1.0;
      for (std::size_t j = i + 1; j < m.n; ++j) {
        const double c = cosine(vectors[i].vector, vectors[j].vector);
        m.values[i * m.n + j] = c;
        m.values[j * m.n + i] = c;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, m.n);
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
  }
  return m;
}

double quantile(std::span<const double> sorted, double q, QuantileMethod method) {
  if (sorted.empty()) throw Error("empty_input", "quantile of no values");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("invalid_argument", "q must lie in [0, 1]");
  const double p = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(p));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = p - static_cast<double>(lo);
  switch (method) {
    case QuantileMethod::lower: return sorted[lo];
    case QuantileMethod::higher: return frac > 0.0 ? sorted[hi] : sorted[lo];
    case QuantileMethod::nearest: return frac > 0.5 ? sorted[hi] : sorted[lo];
    case QuantileMethod::linear: break;
  }
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DistributionSummary summarize_values(std::vector<double> values, const SummaryOptions& opts, std::string theme_id) {
  if (values.empty()) throw Error("empty_input", "no pairwise values");
  if (opts.bins == 0) throw Error("invalid_config", "histogram needs at least one bin");
  std::sort(values.begin(), values.end());

  DistributionSummary s;
  s.theme_id = std::move(theme_id);
  s.pair_count = values.size();
  s.min = values.front();
  s.max = values.back();
  s.median = quantile(values, 0.5, opts.method);
  s.q125 = quantile(values, 0.125, opts.method);
  s.q875 = quantile(values, 0.875, opts.method);
  s.region75 = s.q875 - s.q125;
  s.below_threshold = opts.below_threshold;
  const auto below = std::lower_bound(values.begin(), values.end(), opts.below_threshold) - values.begin();
  s.frac_below = static_cast<double>(below) / static_cast<double>(values.size());

  const double lo = std::min(0.0, s.min);
  const double hi = 1.0;
  const double width = (hi - lo) / static_cast<double>(opts.bins);
  s.histogram.resize(opts.bins);
  for (std::size_t b = 0; b < opts.bins; ++b) {
    s.histogram[b].lo = lo + width * static_cast<double>(b);
    s.histogram[b].hi = b + 1 == opts.bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    s.histogram[std::min(b, opts.bins - 1)].count++;
  }
  return s;
}

DistributionSummary summarize(const SimilarityMatrix& matrix, const SummaryOptions& opts) {
  if (matrix.pair_count() < 1) throw Error("empty_input", "matrix has no pairs");
  return summarize_values(matrix.upper_triangle(), opts, matrix.theme_id);
}

RepresentativePair representative_pair(const SimilarityMatrix& matrix, QuantileMethod method) {
  if (matrix.pair_count() < 1) throw Error("empty_input", "matrix has no pairs");
  struct Candidate {
    std::string a, b;
    double sim;
  };
  std::vector<Candidate> all;
  for (std::size_t i = 0; i < matrix.n; ++i)
    for (std::size_t j = i + 1; j < matrix.n; ++j) {
      auto a = matrix.item_ids[i], b = matrix.item_ids[j];
      if (b < a) std::swap(a, b);
      all.push_back({std::move(a), std::move(b), matrix.at(i, j)});
    }

  std::vector<double> sorted;
  for (const auto& c : all) sorted.push_back(c.sim);
  std::sort(sorted.begin(), sorted.end());
  const double q125 = quantile(sorted, 0.125, method), q875 = quantile(sorted, 0.875, method);

  std::vector<const Candidate*> band;
  for (const auto& c : all)
    if (c.sim >= q125 && c.sim <= q875) band.push_back(&c);
  if (band.empty())
    for (const auto& c : all) band.push_back(&c);

  std::vector<double> band_sims;
  for (const auto* c : band) band_sims.push_back(c->sim);
  std::sort(band_sims.begin(), band_sims.end());
  const double target = quantile(band_sims, 0.5, method);

  const Candidate* best = band.front();
  for (const auto* c : band) {
    const double d = std::abs(c->sim - target), bd = std::abs(best->sim - target);
    if (d < bd || (d == bd && std::tie(c->a, c->b) < std::tie(best->a, best->b))) best = c;
  }
  return {best->a, best->b, best->sim};
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  return cells;
}

}  // namespace

void write_matrix_csv(const SimilarityMatrix& matrix, std::ostream& out) {
  out << "item_id";
  for (const auto& id : matrix.item_ids) out << ',' << csv_field(id);
  out << '\n';
  for (std::size_t i = 0; i < matrix.n; ++i) {
    out << csv_field(matrix.item_ids[i]);
    for (std::size_t j = 0; j < matrix.n; ++j) out << ',' << fmt::format("{}", matrix.at(i, j));
    out << '\n';
  }
}

SimilarityMatrix read_matrix_csv(std::istream& in, std::string theme_id) {
  std::string line;
  if (!std::getline(in, line)) throw Error("parse_error", "matrix: empty file");
  auto header = csv_split(line);
  if (header.empty() || header.front() != "item_id") throw Error("parse_error", "matrix: bad header");
  SimilarityMatrix m;
  m.theme_id = std::move(theme_id);
  m.item_ids.assign(header.begin() + 1, header.end());
  m.n = m.item_ids.size();
  m.values.assign(m.n * m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!std::getline(in, line)) throw Error("parse_error", "matrix: missing rows");
    auto cells = csv_split(line);
    if (cells.size() != m.n + 1 || cells.front() != m.item_ids[i])
      throw Error("parse_error", "matrix: row " + std::to_string(i + 1) + " malformed");
    for (std::size_t j = 0; j < m.n; ++j) m.values[i * m.n + j] = std::stod(cells[j + 1]);
  }
  return m;
}

}  // namespace cnorm
