#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bkr/embedding_store.hpp"

namespace bkr {

// Controls parallelism only; no setting here may change a result.
struct ExecutionPolicy {
  int workers = 0;               // 0: OpenMP default
  std::size_t block_rows = 64;   // rows per cache block on each side

  [[nodiscard]] int resolved_workers() const noexcept;
};

// Ranking order used everywhere: descending similarity, ties broken by
// ascending row index. Ranks are 1-based.
inline constexpr const char* kTiePolicy = "descending cosine, ties by ascending row index";

// 64-bit accumulation in a fixed lane order, independent of threading.
double dot(std::span<const float> u, std::span<const float> v) noexcept;

// L2 norms in 64-bit; throws kZeroNorm naming the row if any norm <= 1e-12.
std::vector<double> row_norms(const EmbeddingMatrix& matrix);

// Cosine from a dot product and the two norms, clamped to [-1, 1].
double cosine_from_dot(double dot_uv, double norm_u, double norm_v) noexcept;

double cosine(std::span<const float> u, std::span<const float> v);

std::size_t top1_index(std::span<const float> query, const EmbeddingMatrix& candidates);

std::size_t rank_of(std::size_t target_index, std::span<const float> query, const EmbeddingMatrix& candidates);

// 1-based rank of scores[target] under the tie policy, in O(n).
std::size_t rank_in_scores(std::span<const double> scores, std::size_t target);

class SimilarityMatrix {
 public:
  SimilarityMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * cols_, cols_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

SimilarityMatrix pairwise(const EmbeddingMatrix& a, const EmbeddingMatrix& b, const ExecutionPolicy& exec = {});

// Batched top1_index for every row of `queries`, blocked over both sides.
std::vector<std::size_t> top1_indices(const EmbeddingMatrix& queries, const EmbeddingMatrix& candidates,
                                      const ExecutionPolicy& exec = {});

// Cosine of one query against every candidate, using precomputed candidate norms.
void score_all(std::span<const float> query, double query_norm, const EmbeddingMatrix& candidates,
               std::span<const double> candidate_norms, std::span<double> out) noexcept;

}  // namespace bkr

namespace bkr {

// For each query row i and each candidate index t in targets[i], the rank of
// candidate t under query i. Blocked over candidates so the candidate matrix is
// streamed once per query block rather than once per query.
std::vector<std::vector<std::size_t>> batch_ranks(const EmbeddingMatrix& queries, const EmbeddingMatrix& candidates,
                                                  const std::vector<std::vector<std::size_t>>& targets,
                                                  const ExecutionPolicy& exec = {});

}  // namespace bkr
