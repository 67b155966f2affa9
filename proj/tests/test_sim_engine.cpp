#include <gtest/gtest.h>

#include "bkr/error.hpp"
#include "bkr/sim_engine.hpp"
#include "test_support.hpp"

using namespace bkr;
using bkr::testing::to_matrix;

TEST(Cosine, KnownValues) {
  const std::vector<float> a{1, 0};
  const std::vector<float> b{0, 1};
  const std::vector<float> c{-2, 0};
  EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine(a, c), -1.0);
  EXPECT_EQ(cosine_from_dot(1.0 + 1e-9, 1.0, 1.0), 1.0);
  EXPECT_EQ(cosine_from_dot(-1.0 - 1e-9, 1.0, 1.0), -1.0);
}

TEST(Cosine, ZeroVectorThrows) {
  const std::vector<float> a{1, 0};
  const std::vector<float> z{0, 0};
  EXPECT_THROW(cosine(a, z), Error);
  EXPECT_THROW(row_norms(EmbeddingMatrix(2, {1, 1, 0, 0}, {"a", "b"})), Error);
}

TEST(Dot, MatchesSequentialSum) {
  std::mt19937_64 gen(11);
  for (std::size_t dim : {1U, 7U, 8U, 9U, 31U, 768U}) {
    const auto m = oracle::random_matrix(gen, 2, dim, 0.0);
    const auto e = to_matrix(m);
    double seq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) seq += m[0][i] * m[1][i];
    EXPECT_NEAR(dot(e.row(0), e.row(1)), seq, 1e-9 * static_cast<double>(dim));
  }
}

TEST(Rank, TiesBreakByIndex) {
  // Candidates 0 and 2 tie exactly with the query; 1 is orthogonal.
  const EmbeddingMatrix cands(2, {1, 1, 1, -1, 2, 2}, {"a", "b", "c"});
  const std::vector<float> q{1, 1};
  EXPECT_EQ(top1_index(q, cands), 0U);
  EXPECT_EQ(rank_of(0, q, cands), 1U);
  EXPECT_EQ(rank_of(2, q, cands), 2U);
  EXPECT_EQ(rank_of(1, q, cands), 3U);
  const std::vector<double> scores{0.5, 0.9, 0.5, 0.5};
  EXPECT_EQ(rank_in_scores(scores, 1), 1U);
  EXPECT_EQ(rank_in_scores(scores, 0), 2U);
  EXPECT_EQ(rank_in_scores(scores, 3), 4U);
}

TEST(Rank, EmptyCandidatesAndBadTarget) {
  const EmbeddingMatrix empty(2, {}, {});
  const std::vector<float> q{1, 1};
  EXPECT_THROW(top1_index(q, empty), Error);
  const EmbeddingMatrix one(2, {1, 0}, {"a"});
  EXPECT_THROW(rank_of(1, q, one), Error);
  const std::vector<float> wrong{1, 1, 1};
  EXPECT_THROW(top1_index(wrong, one), Error);
}

TEST(Rank, AgreesWithOracleOnRandomMatrices) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + gen() % 50;
    const std::size_t dim = 1 + gen() % 8;
    const auto qm = oracle::random_matrix(gen, n, dim);
    const auto cm = oracle::random_matrix(gen, n, dim);
    const auto q = to_matrix(qm);
    const auto c = to_matrix(cm);
    const auto tops = top1_indices(q, c, {1, 7});
    std::vector<std::vector<std::size_t>> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = {i, (i * 7) % n};
    const auto ranks = batch_ranks(q, c, targets, {2, 5});
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(top1_index(q.row(i), c), oracle::top1(qm[i], cm));
      ASSERT_EQ(tops[i], oracle::top1(qm[i], cm));
      for (std::size_t t = 0; t < 2; ++t) {
        ASSERT_EQ(ranks[i][t], oracle::rank(targets[i][t], qm[i], cm));
        ASSERT_EQ(rank_of(targets[i][t], q.row(i), c), ranks[i][t]);
      }
    }
  }
}

TEST(Pairwise, MatchesScalarCosineAndIsWorkerInvariant) {
  std::mt19937_64 gen(5);
  const auto a = to_matrix(oracle::random_matrix(gen, 70, 13));
  const auto b = to_matrix(oracle::random_matrix(gen, 90, 13));
  const auto s1 = pairwise(a, b, {1, 64});
  const auto s4 = pairwise(a, b, {4, 7});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      ASSERT_EQ(s1(i, j), s4(i, j));
      ASSERT_EQ(s1(i, j), cosine(a.row(i), b.row(j)));
      ASSERT_NEAR(s1(i, j), oracle::cosine(bkr::testing::to_oracle(a)[i], bkr::testing::to_oracle(b)[j]), 1e-12);
    }
  }
}

TEST(Pairwise, DimMismatchThrows) {
  const EmbeddingMatrix a(2, {1, 0}, {"a"});
  const EmbeddingMatrix b(3, {1, 0, 0}, {"b"});
  EXPECT_THROW(pairwise(a, b), Error);
  EXPECT_THROW(top1_indices(a, b), Error);
}
