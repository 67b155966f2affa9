#include <gtest/gtest.h>

#include "bkr/error.hpp"
#include "bkr/losses.hpp"
#include "test_support.hpp"

using namespace bkr;
using namespace bkr::losses;
using bkr::testing::to_matrix;

namespace {

RecipeBatch batch_of(const oracle::Mat& body, const oracle::Mat& title, std::vector<std::string> langs) {
  return RecipeBatch{to_matrix(body, "b"), to_matrix(title, "t"), std::move(langs)};
}

}  // namespace

TEST(CosineDistance, Extremes) {
  const std::vector<float> a{1, 0};
  const std::vector<float> b{0, 3};
  const std::vector<float> c{-1, 0};
  EXPECT_EQ(cosine_distance(a, a), 0.0);
  EXPECT_EQ(cosine_distance(a, b), 1.0);
  EXPECT_EQ(cosine_distance(a, c), 2.0);
}

TEST(Triplet, AnalyticCases) {
  const std::vector<float> body{1, 0};
  const std::vector<float> ortho{0, 1};
  EXPECT_EQ(triplet_loss(body, body, ortho, 0.1), 0.0);
  EXPECT_EQ(triplet_loss(body, ortho, body, 0.1), 1.1);
}

TEST(Triplet, ConstructedDistances) {
  // Integer vectors with exact norms: cos = 7/10 and 13/20.
  const std::vector<float> body{1, 0, 0, 0, 0};
  const std::vector<float> title{7, 7, 1, 1, 0};
  const std::vector<float> negative{13, 15, 2, 1, 1};
  EXPECT_NEAR(cosine_distance(body, title), 0.3, 1e-15);
  EXPECT_NEAR(cosine_distance(body, negative), 0.35, 1e-15);
  EXPECT_NEAR(triplet_loss(body, title, negative, 0.1), 0.05, 1e-9);
}

TEST(Triplet, ZeroIffMarginSatisfied) {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 500; ++t) {
    const auto m = oracle::random_matrix(gen, 3, 4, 0.0);
    const auto e = to_matrix(m);
    const double margin = 0.05 * (t % 5);
    const double loss = triplet_loss(e.row(0), e.row(1), e.row(2), margin);
    const double dp = cosine_distance(e.row(0), e.row(1));
    const double dn = cosine_distance(e.row(0), e.row(2));
    EXPECT_GE(loss, 0.0);
    EXPECT_EQ(loss == 0.0, dn >= dp + margin);
  }
}

TEST(Triplet, Errors) {
  const std::vector<float> a{1, 0};
  const std::vector<float> b{1, 0, 0};
  EXPECT_THROW(triplet_loss(a, a, b, 0.1), Error);
  EXPECT_THROW(triplet_loss(a, a, a, -0.1), Error);
}

TEST(Neighbourhoods, DuplicateDirectionAndFullLanguage) {
  const auto batch = batch_of({{1, 0}, {0, 1}, {1, 1}, {2, 0}}, {{0, 1}, {1, 1}, {-1, 0}, {3, 0}},
                              {"en", "de", "de", "de"});
  const auto n = language_neighborhoods(0, batch, "de", 1);
  ASSERT_EQ(n.size(), 1U);
  EXPECT_EQ(n[0], 3U);
  EXPECT_EQ(cosine_distance(batch.body.row(0), batch.title.row(3)), 0.0);
  EXPECT_EQ(language_neighborhoods(0, batch, "de", 3), (std::vector<std::size_t>{3, 1, 2}));
  EXPECT_THROW(language_neighborhoods(0, batch, "de", 4), Error);
  // r is excluded from its own language.
  EXPECT_THROW(language_neighborhoods(0, batch, "en", 1), Error);
  EXPECT_THROW(language_neighborhoods(9, batch, "de", 1), Error);
}

TEST(Neighbourhoods, TiesByIndex) {
  const auto batch = batch_of({{1, 0}, {1, 0}, {1, 0}, {1, 0}}, {{1, 0}, {0, 1}, {0, 2}, {0, 1}},
                              {"a", "a", "a", "a"});
  EXPECT_EQ(language_neighborhoods(0, batch, "a", 3), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Neighbourhoods, MatchesExhaustiveScan) {
  std::mt19937_64 gen(40);
  for (int t = 0; t < 20; ++t) {
    const auto body = oracle::random_matrix(gen, 40, 6);
    const auto title = oracle::random_matrix(gen, 40, 6);
    std::vector<std::string> langs;
    for (int i = 0; i < 40; ++i) langs.push_back(gen() % 2 ? "en" : "ja");
    if (std::count(langs.begin(), langs.end(), "en") < 7 || std::count(langs.begin(), langs.end(), "ja") < 7) continue;
    const auto batch = batch_of(body, title, langs);
    for (std::size_t r = 0; r < 40; ++r) {
      for (const std::string l : {"en", "ja"}) {
        ASSERT_EQ(language_neighborhoods(r, batch, l, 5), oracle::neighbourhood(r, body, title, langs, l, 5));
      }
    }
  }
}

TEST(XlPenalty, AnalyticTwoLanguages) {
  // Same-language neighbour at cos 4/5, other-language neighbour at cos 1/2.
  const auto batch = batch_of({{1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}},
                              {{1, 0, 0, 0}, {4, 3, 0, 0}, {1, 1, 1, 1}}, {"a", "a", "b"});
  EXPECT_DOUBLE_EQ(xl_penalty(0, batch, 1), 0.3);
}

TEST(XlPenalty, SymmetricIsZero) {
  const auto batch = batch_of({{1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}},
                              {{1, 0}, {1, 1}, {1, 1}, {1, 1}, {1, 1}}, {"a", "a", "b", "c", "c"});
  EXPECT_EQ(xl_penalty(0, batch, 1), 0.0);
}

TEST(XlPenalty, ThreeLanguagesMatchOracle) {
  std::mt19937_64 gen(41);
  const std::vector<std::string> names{"en", "fr", "zh"};
  for (int t = 0; t < 20; ++t) {
    const auto body = oracle::random_matrix(gen, 30, 5);
    const auto title = oracle::random_matrix(gen, 30, 5);
    std::vector<std::string> langs;
    for (int i = 0; i < 30; ++i) langs.push_back(names[i % 3]);
    std::shuffle(langs.begin(), langs.end(), gen);
    const auto batch = batch_of(body, title, langs);
    for (std::size_t r = 0; r < 30; ++r) {
      ASSERT_NEAR(xl_penalty(r, batch, 2), oracle::xl_penalty(r, body, title, langs, 2), 1e-12);
    }
  }
}

TEST(XlPenalty, RelabelingOtherLanguagesIsInvariant) {
  std::mt19937_64 gen(42);
  const auto body = oracle::random_matrix(gen, 24, 4);
  const auto title = oracle::random_matrix(gen, 24, 4);
  std::vector<std::string> langs;
  for (int i = 0; i < 24; ++i) langs.push_back(std::vector<std::string>{"x", "y", "z"}[i % 3]);
  auto relabeled = langs;
  for (auto& l : relabeled) l = l == "y" ? "z" : (l == "z" ? "y" : l);
  const auto a = batch_of(body, title, langs);
  const auto b = batch_of(body, title, relabeled);
  for (std::size_t r = 0; r < 24; r += 3) EXPECT_NEAR(xl_penalty(r, a, 3), xl_penalty(r, b, 3), 1e-15);
}

TEST(Combined, ComponentSumAndReduction) {
  std::mt19937_64 gen(43);
  const auto body = oracle::random_matrix(gen, 30, 5);
  const auto title = oracle::random_matrix(gen, 30, 5);
  std::vector<std::string> langs;
  for (int i = 0; i < 30; ++i) langs.push_back(i % 2 ? "en" : "es");
  const auto batch = batch_of(body, title, langs);
  LossConfig cfg;
  cfg.neighbor_count = 3;
  for (std::size_t r = 0; r < 30; ++r) {
    const std::size_t neg = (r + 7) % 30;
    const double trip = triplet_loss(batch.body.row(r), batch.title.row(r), batch.title.row(neg), cfg.margin);
    const double xl = oracle::xl_penalty(r, body, title, langs, 3);
    EXPECT_NEAR(combined_loss(r, batch, neg, cfg), trip + cfg.xl_weight * xl, 1e-12);
    LossConfig zero = cfg;
    zero.xl_weight = 0.0;
    EXPECT_EQ(combined_loss(r, batch, neg, zero), trip);
    double prev = -1.0;
    for (double beta : {0.0, 0.01, 0.1, 1.0}) {
      LossConfig c = cfg;
      c.xl_weight = beta;
      const double v = combined_loss(r, batch, neg, c);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Combined, ZeroWhenTripletZeroAndSymmetric) {
  const auto batch = batch_of({{1, 0}, {1, 0}, {1, 0}}, {{1, 0}, {0, 1}, {0, 1}}, {"a", "a", "b"});
  LossConfig cfg;
  cfg.neighbor_count = 1;
  EXPECT_EQ(combined_loss(0, batch, 1, cfg), 0.0);
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.neighbor_count = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.margin = -1;
  EXPECT_THROW(cfg.validate(), Error);
  const RecipeBatch bad{to_matrix({{1, 0}}), to_matrix({{1, 0}, {0, 1}}), {"a"}};
  EXPECT_THROW(bad.validate(), Error);
}
