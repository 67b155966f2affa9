#include <gtest/gtest.h>

#include <cmath>

#include "bkr/error.hpp"
#include "bkr/stats.hpp"
#include "oracles.hpp"

using namespace bkr;
using namespace bkr::stats;

namespace {
std::vector<double> draws(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.3, 0.2);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}
}  // namespace

TEST(Pearson, KnownValue) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{1, 3, 2, 4};
  EXPECT_NEAR(pearson(x, y), 0.8, 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> c{2, 2, 2};
  try {
    pearson(x, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedCorrelation);
  }
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
  EXPECT_THROW(pearson(std::vector<double>{1, NAN}, std::vector<double>{1, 2}), Error);
}

TEST(Spearman, TiedRanks) {
  const std::vector<double> x{1, 2, 2, 3};
  const std::vector<double> y{1, 2, 3, 4};
  EXPECT_NEAR(spearman(x, y), 0.9486832980505138, 1e-12);
  const auto r = average_ranks(x);
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Correlation, PropertiesAgainstOracle) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> small(0, 5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + t % 30;
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = t % 2 ? small(gen) : std::normal_distribution<double>()(gen);
      y[i] = x[i] * 0.5 + std::normal_distribution<double>()(gen);
    }
    if (*std::max_element(x.begin(), x.end()) == *std::min_element(x.begin(), x.end())) continue;
    const double p = pearson(x, y);
    const double s = spearman(x, y);
    EXPECT_LE(std::abs(p), 1.0);
    EXPECT_LE(std::abs(s), 1.0);
    EXPECT_NEAR(p, oracle::pearson(x, y), 1e-9);
    EXPECT_NEAR(s, oracle::spearman(x, y), 1e-9);
    EXPECT_NEAR(pearson(y, x), p, 1e-15);
    // Spearman is invariant under strictly increasing transforms.
    std::vector<double> ex(n);
    for (std::size_t i = 0; i < n; ++i) ex[i] = std::exp(x[i]) + 3.0 * x[i];
    EXPECT_NEAR(spearman(ex, y), s, 1e-12);
    EXPECT_EQ(average_ranks(x), oracle::average_ranks(x));
  }
}

TEST(Aggregate, TwoValues) {
  const auto a = aggregate_seeds(std::vector<double>{0, 1});
  EXPECT_DOUBLE_EQ(a.mean, 0.5);
  EXPECT_NEAR(a.std_dev, 0.70710678, 1e-8);
  EXPECT_NEAR(a.std_error, 0.5, 1e-12);
  EXPECT_EQ(a.count, 2U);
  EXPECT_THROW(aggregate_seeds(std::vector<double>{1}), Error);
}

TEST(Aggregate, MatchesScalarRecomputation) {
  const auto v = draws(9, 25);
  double sum = 0;
  for (double x : v) sum += x;
  const double mean = sum / 25.0;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / 24.0);
  const auto a = aggregate_seeds(v);
  EXPECT_NEAR(a.mean, mean, 1e-12);
  EXPECT_NEAR(a.std_dev, sd, 1e-12);
  EXPECT_NEAR(a.std_error, sd / 5.0, 1e-12);
}

TEST(Significance, ConstantShiftExactP) {
  std::vector<double> b(10);
  for (std::size_t i = 0; i < 10; ++i) b[i] = 0.1 * static_cast<double>(i);
  std::vector<double> a = b;
  for (auto& x : a) x += 1.0;
  EXPECT_NEAR(paired_significance(a, b), 2.0 / 1024.0, 1e-15);
}

TEST(Significance, IdenticalSeriesGiveOne) {
  const auto a = draws(3, 25);
  EXPECT_EQ(paired_significance(a, a), 1.0);
  const auto b = draws(4, 12);
  EXPECT_EQ(paired_significance(b, b), 1.0);
}

TEST(Significance, MixedSignsMatchEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = draws(seed, 12);
    const auto b = draws(seed + 100, 12);
    EXPECT_NEAR(paired_significance(a, b), oracle::permutation_p(a, b), 1e-12);
  }
}

TEST(Significance, MonteCarloIsSeededAndClose) {
  const auto a = draws(1, 22);
  auto b = draws(2, 22);
  for (auto& x : b) x += 0.05;
  const double p1 = paired_significance(a, b, 5);
  EXPECT_EQ(p1, paired_significance(a, b, 5));
  EXPECT_GT(p1, 0.0);
  EXPECT_LE(p1, 1.0);
  // Exact value over the first 20 pairs bounds nothing, but MC error at 1e5 flips is < 0.005.
  const double p_alt = paired_significance(a, b, 6);
  EXPECT_NEAR(p1, p_alt, 0.01);
}

TEST(Significance, Errors) {
  const std::vector<double> five{1, 2, 3, 4, 5};
  EXPECT_THROW(paired_significance(five, five), Error);
  EXPECT_THROW(paired_significance(draws(1, 8), draws(1, 7)), Error);
}

TEST(MetricSeries, Validation) {
  MetricSeries ok{{"a", "b"}, {1, 2}};
  EXPECT_NO_THROW(ok.validate());
  MetricSeries bad{{"a"}, {1, 2}};
  EXPECT_THROW(bad.validate(), Error);
  MetricSeries dup{{"a", "a"}, {1, 2}};
  EXPECT_THROW(dup.validate(), Error);
}
