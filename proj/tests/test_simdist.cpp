#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cnorm/error.hpp"
#include "cnorm/simdist.hpp"

using namespace cnorm;

namespace {

SimilarityMatrix matrix_from_pairs(const std::vector<std::string>& ids, const std::vector<double>& upper) {
  SimilarityMatrix m;
  m.n = ids.size();
  m.item_ids = ids;
  m.values.assign(m.n * m.n, 1.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = i + 1; j < m.n; ++j) m.values[i * m.n + j] = m.values[j * m.n + i] = upper[k++];
  return m;
}

// Independent quantile oracle: walk the sorted values to the bracketing pair.
double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = 0;
  while (static_cast<double>(lo + 1) <= pos && lo + 1 < v.size()) ++lo;
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v[lo];
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 1.0);
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 1.0 / std::sqrt(2.0), 1e-15);
  try {
    cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "zero_norm");
  }
}

TEST(Cosine, SymmetricScaleInvariantBounded) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> u(5), v(5);
    for (auto& x : u) x = g(rng);
    for (auto& x : v) x = g(rng);
    const double c = cosine(u, v);
    EXPECT_EQ(c, cosine(v, u));
    auto su = u;
    for (auto& x : su) x *= 3.7;
    EXPECT_NEAR(cosine(su, v), c, 1e-14);
    EXPECT_LE(std::abs(c), 1.0);
  }
  std::vector<double> w = {1e-3, 2e-3};
  EXPECT_LE(cosine(w, w), 1.0);
}

TEST(SimilarityMatrix, BasicShapes) {
  std::vector<SentenceVector> same = {{"a", {1, 2}}, {"b", {1, 2}}};
  const auto m = similarity_matrix(same, "t");
  EXPECT_NEAR(m.at(0, 1), 1.0, 1e-15);
  EXPECT_EQ(m.at(0, 0), 1.0);

  std::vector<SentenceVector> ortho = {{"a", {1, 0, 0}}, {"b", {0, 1, 0}}, {"c", {0, 0, 1}}};
  const auto o = similarity_matrix(ortho);
  EXPECT_EQ(o.upper_triangle(), (std::vector<double>{0, 0, 0}));

  std::vector<SentenceVector> five;
  for (int i = 0; i < 5; ++i) five.push_back({std::to_string(i), {1.0 + i, 1.0}});
  EXPECT_EQ(similarity_matrix(five).pair_count(), 10u);
}

TEST(SimilarityMatrix, ZeroVectorNamesItem) {
  std::vector<SentenceVector> v = {{"a", {1, 0}}, {"bad", {0, 0}}};
  try {
    similarity_matrix(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
  std::vector<SentenceVector> one = {{"a", {1, 0}}};
  EXPECT_THROW(similarity_matrix(one), Error);
}

TEST(SimilarityMatrix, ThreadCountDoesNotChangeValues) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<SentenceVector> v;
  for (int i = 0; i < 40; ++i) {
    SentenceVector s{std::to_string(i), std::vector<double>(8)};
    for (auto& x : s.vector) x = g(rng);
    v.push_back(s);
  }
  const auto a = similarity_matrix(v, "t", 1);
  const auto b = similarity_matrix(v, "t", 4);
  EXPECT_EQ(a.values, b.values);
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.n; ++j) EXPECT_EQ(a.at(i, j), a.at(j, i));
}

TEST(Quantile, Examples) {
  std::vector<double> nine;
  for (int i = 0; i <= 8; ++i) nine.push_back(i * 0.125);
  EXPECT_DOUBLE_EQ(quantile(nine, 0.875), 0.875);
  EXPECT_DOUBLE_EQ(quantile(nine, 0.125), 0.125);
  EXPECT_DOUBLE_EQ(summarize_values(nine).region75, 0.75);
  std::vector<double> two = {0.2, 0.6};
  EXPECT_DOUBLE_EQ(quantile(two, 0.5), 0.4);
  std::vector<double> c(7, 0.93);
  EXPECT_EQ(quantile(c, 0.3), 0.93);
  EXPECT_THROW(quantile(std::vector<double>{}, 0.5), Error);
}

TEST(Quantile, AlternativeMethods) {
  std::vector<double> v = {1, 2, 3, 4};
  EXPECT_EQ(quantile(v, 0.5, QuantileMethod::lower), 2);
  EXPECT_EQ(quantile(v, 0.5, QuantileMethod::higher), 3);
  EXPECT_EQ(quantile(v, 0.4, QuantileMethod::nearest), 2);
  EXPECT_EQ(parse_quantile_method("nearest"), QuantileMethod::nearest);
  EXPECT_EQ(to_string(QuantileMethod::linear), "linear");
  EXPECT_THROW(parse_quantile_method("midpoint-ish"), Error);
}

TEST(Quantile, MatchesSortedInterpolationOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + rng() % 60);
    for (auto& x : v) x = u(rng);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    double prev = -2;
    for (double q = 0; q <= 1.0 + 1e-12; q += 0.0625) {
      const double got = quantile(sorted, std::min(q, 1.0));
      EXPECT_NEAR(got, oracle_quantile(v, std::min(q, 1.0)), 1e-15);
      EXPECT_GE(got, prev);
      prev = got;
    }
    EXPECT_EQ(quantile(sorted, 0), sorted.front());
    EXPECT_EQ(quantile(sorted, 1), sorted.back());
  }
}

TEST(Summarize, Examples) {
  const auto a = summarize_values({0.9, 0.9, 0.9});
  EXPECT_EQ(a.median, 0.9);
  EXPECT_EQ(a.region75, 0.0);
  EXPECT_EQ(a.frac_below, 0.0);
  const auto b = summarize_values({0.5, 0.7, 0.9, 1.0});
  EXPECT_EQ(b.frac_below, 0.5);
  EXPECT_EQ(b.pair_count, 4u);
  EXPECT_THROW(summarize_values({}), Error);
}

TEST(Summarize, HistogramCoversRangeAndCounts) {
  const auto s = summarize_values({-0.2, 0.5, 0.7, 0.9, 1.0, 1.0});
  ASSERT_EQ(s.histogram.size(), 50u);
  EXPECT_DOUBLE_EQ(s.histogram.front().lo, -0.2);
  EXPECT_DOUBLE_EQ(s.histogram.back().hi, 1.0);
  std::size_t total = 0;
  for (const auto& b : s.histogram) total += b.count;
  EXPECT_EQ(total, 6u);
  EXPECT_EQ(s.histogram.back().count, 2u);

  const auto pos = summarize_values({0.95, 0.96});
  EXPECT_EQ(pos.histogram.front().lo, 0.0);
  const auto flat = summarize_values({0.97, 0.97, 0.97});
  EXPECT_EQ(std::count_if(flat.histogram.begin(), flat.histogram.end(), [](auto& b) { return b.count > 0; }), 1);
}

TEST(Summarize, InvariantsOnRandomMatrices) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.3, 1.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 12;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
    std::vector<double> upper(n * (n - 1) / 2);
    for (auto& x : upper) x = u(rng);
    const auto m = matrix_from_pairs(ids, upper);
    const auto s = summarize(m);
    EXPECT_LE(s.q125, s.median);
    EXPECT_LE(s.median, s.q875);
    EXPECT_GE(s.region75, 0.0);
    EXPECT_LE(s.region75, s.max - s.min);

    // Permute items identically on rows and columns.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SimilarityMatrix p = m;
    for (std::size_t i = 0; i < n; ++i) {
      p.item_ids[i] = m.item_ids[perm[i]];
      for (std::size_t j = 0; j < n; ++j) p.values[i * n + j] = m.at(perm[i], perm[j]);
    }
    const auto sp = summarize(p);
    EXPECT_EQ(sp.median, s.median);
    EXPECT_EQ(sp.q125, s.q125);
    EXPECT_EQ(sp.q875, s.q875);
    EXPECT_EQ(sp.frac_below, s.frac_below);
    const auto rp = representative_pair(m), rpp = representative_pair(p);
    EXPECT_EQ(std::minmax(rp.first, rp.second), std::minmax(rpp.first, rpp.second));
  }
}

TEST(RepresentativePair, InBandMedian) {
  const auto m = matrix_from_pairs({"A", "B", "C"}, {0.5, 0.9, 1.0});
  const auto r = representative_pair(m);
  EXPECT_EQ(r.first, "A");
  EXPECT_EQ(r.second, "C");
  EXPECT_EQ(r.similarity, 0.9);
}

TEST(RepresentativePair, TiesAndSinglePair) {
  const auto eq = matrix_from_pairs({"c", "b", "a"}, {0.8, 0.8, 0.8});
  const auto r = representative_pair(eq);
  EXPECT_EQ(r.first, "a");
  EXPECT_EQ(r.second, "b");
  const auto one = matrix_from_pairs({"x", "y"}, {0.3});
  const auto r1 = representative_pair(one);
  EXPECT_EQ(r1.first, "x");
  EXPECT_EQ(r1.similarity, 0.3);
}

TEST(MatrixCsv, RoundTrip) {
  const auto m = matrix_from_pairs({"a", "b,c", "d"}, {0.125, 0.3333333333333333, -0.5});
  std::stringstream ss;
  write_matrix_csv(m, ss);
  const auto back = read_matrix_csv(ss, "t");
  EXPECT_EQ(back.item_ids, m.item_ids);
  EXPECT_EQ(back.values, m.values);
}
