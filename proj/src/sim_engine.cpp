#include "bkr/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bkr/error.hpp"

namespace bkr {

namespace {

constexpr double kMinNorm = 1e-12;
constexpr std::size_t kLanes = 8;

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::kDimMismatch, std::to_string(a) + " vs " + std::to_string(b));
}

double checked_norm(std::span<const float> v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > kMinNorm)) throw Error(ErrorCode::kZeroNorm, "vector norm " + std::to_string(n));
  return n;
}

}  // namespace

int ExecutionPolicy::resolved_workers() const noexcept {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  return 1;
#endif
}

double dot(std::span<const float> u, std::span<const float> v) noexcept {
  const float* a = u.data();
  const float* b = v.data();
  const std::size_t n = u.size();
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
    }
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail;
}

std::vector<double> row_norms(const EmbeddingMatrix& matrix) {
  std::vector<double> norms(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    norms[i] = std::sqrt(dot(matrix.row(i), matrix.row(i)));
    if (!(norms[i] > kMinNorm)) {
      throw Error(ErrorCode::kZeroNorm, "row '" + matrix.id(i) + "' has norm " + std::to_string(norms[i]));
    }
  }
  return norms;
}

double cosine_from_dot(double dot_uv, double norm_u, double norm_v) noexcept {
  return std::clamp(dot_uv / (norm_u * norm_v), -1.0, 1.0);
}

double cosine(std::span<const float> u, std::span<const float> v) {
  require_same_dim(u.size(), v.size());
  const double nu = checked_norm(u);
  const double nv = checked_norm(v);
  return cosine_from_dot(dot(u, v), nu, nv);
}

void score_all(std::span<const float> query, double query_norm, const EmbeddingMatrix& candidates,
               std::span<const double> candidate_norms, std::span<double> out) noexcept {
  for (std::size_t j = 0; j < candidates.rows(); ++j) {
    out[j] = cosine_from_dot(dot(query, candidates.row(j)), query_norm, candidate_norms[j]);
  }
}

std::size_t top1_index(std::span<const float> query, const EmbeddingMatrix& candidates) {
  if (candidates.rows() == 0) throw Error(ErrorCode::kEmpty, "top1_index: no candidates");
  require_same_dim(query.size(), candidates.dim());
  const double qn = checked_norm(query);
  const auto norms = row_norms(candidates);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < candidates.rows(); ++j) {
    const double s = cosine_from_dot(dot(query, candidates.row(j)), qn, norms[j]);
    if (s > best_score) {
      best_score = s;
      best = j;
    }
  }
  return best;
}

std::size_t rank_in_scores(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) {
    throw Error(ErrorCode::kOutOfRange, "target " + std::to_string(target) + " of " + std::to_string(scores.size()));
  }
  const double t = scores[target];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    ahead += (scores[j] > t) || (scores[j] == t && j < target);
  }
  return ahead + 1;
}

std::size_t rank_of(std::size_t target_index, std::span<const float> query, const EmbeddingMatrix& candidates) {
  if (target_index >= candidates.rows()) {
    throw Error(ErrorCode::kOutOfRange,
                "target " + std::to_string(target_index) + " of " + std::to_string(candidates.rows()));
  }
  require_same_dim(query.size(), candidates.dim());
  const double qn = checked_norm(query);
  const auto norms = row_norms(candidates);
  std::vector<double> scores(candidates.rows());
  score_all(query, qn, candidates, norms, scores);
  return rank_in_scores(scores, target_index);
}

SimilarityMatrix pairwise(const EmbeddingMatrix& a, const EmbeddingMatrix& b, const ExecutionPolicy& exec) {
  require_same_dim(a.dim(), b.dim());
  const auto na = row_norms(a);
  const auto nb = row_norms(b);
  SimilarityMatrix out(a.rows(), b.rows());
  const std::size_t block = std::max<std::size_t>(1, exec.block_rows);
  const auto a_blocks = static_cast<std::ptrdiff_t>((a.rows() + block - 1) / block);

#pragma omp parallel for schedule(dynamic) num_threads(exec.resolved_workers())
  for (std::ptrdiff_t ab = 0; ab < a_blocks; ++ab) {
    const std::size_t i0 = static_cast<std::size_t>(ab) * block;
    const std::size_t i1 = std::min(a.rows(), i0 + block);
    for (std::size_t j0 = 0; j0 < b.rows(); j0 += block) {
      const std::size_t j1 = std::min(b.rows(), j0 + block);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) {
          out(i, j) = cosine_from_dot(dot(a.row(i), b.row(j)), na[i], nb[j]);
        }
      }
    }
  }
  return out;
}

std::vector<std::size_t> top1_indices(const EmbeddingMatrix& queries, const EmbeddingMatrix& candidates,
                                      const ExecutionPolicy& exec) {
  if (candidates.rows() == 0) throw Error(ErrorCode::kEmpty, "top1_indices: no candidates");
  require_same_dim(queries.dim(), candidates.dim());
  const auto nq = row_norms(queries);
  const auto nc = row_norms(candidates);
  std::vector<std::size_t> best(queries.rows(), 0);
  std::vector<double> best_score(queries.rows(), -std::numeric_limits<double>::infinity());
  const std::size_t block = std::max<std::size_t>(1, exec.block_rows);
  const auto q_blocks = static_cast<std::ptrdiff_t>((queries.rows() + block - 1) / block);

  // Candidate blocks are visited in ascending order, so a strict '>' update
  // keeps the lowest index among ties.
#pragma omp parallel for schedule(dynamic) num_threads(exec.resolved_workers())
  for (std::ptrdiff_t qb = 0; qb < q_blocks; ++qb) {
    const std::size_t i0 = static_cast<std::size_t>(qb) * block;
    const std::size_t i1 = std::min(queries.rows(), i0 + block);
    for (std::size_t j0 = 0; j0 < candidates.rows(); j0 += block) {
      const std::size_t j1 = std::min(candidates.rows(), j0 + block);
      for (std::size_t i = i0; i < i1; ++i) {
        const auto q = queries.row(i);
        for (std::size_t j = j0; j < j1; ++j) {
          const double s = cosine_from_dot(dot(q, candidates.row(j)), nq[i], nc[j]);
          if (s > best_score[i]) {
            best_score[i] = s;
            best[i] = j;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace bkr

namespace bkr {

std::vector<std::vector<std::size_t>> batch_ranks(const EmbeddingMatrix& queries, const EmbeddingMatrix& candidates,
                                                  const std::vector<std::vector<std::size_t>>& targets,
                                                  const ExecutionPolicy& exec) {
  require_same_dim(queries.dim(), candidates.dim());
  if (targets.size() != queries.rows()) {
    throw Error(ErrorCode::kCountMismatch, "batch_ranks: one target list per query required");
  }
  for (const auto& list : targets) {
    for (auto t : list) {
      if (t >= candidates.rows()) {
        throw Error(ErrorCode::kOutOfRange,
                    "target " + std::to_string(t) + " of " + std::to_string(candidates.rows()));
      }
    }
  }
  const auto nq = row_norms(queries);
  const auto nc = row_norms(candidates);
  std::vector<std::vector<std::size_t>> ranks(queries.rows());
  const std::size_t block = std::max<std::size_t>(1, exec.block_rows);
  const auto q_blocks = static_cast<std::ptrdiff_t>((queries.rows() + block - 1) / block);

#pragma omp parallel for schedule(dynamic) num_threads(exec.resolved_workers())
  for (std::ptrdiff_t qb = 0; qb < q_blocks; ++qb) {
    const std::size_t i0 = static_cast<std::size_t>(qb) * block;
    const std::size_t i1 = std::min(queries.rows(), i0 + block);
    std::vector<std::vector<double>> target_scores(i1 - i0);
    for (std::size_t i = i0; i < i1; ++i) {
      auto& ts = target_scores[i - i0];
      ts.reserve(targets[i].size());
      for (auto t : targets[i]) ts.push_back(cosine_from_dot(dot(queries.row(i), candidates.row(t)), nq[i], nc[t]));
      ranks[i].assign(targets[i].size(), 1);
    }
    std::vector<double> scores(block);
    for (std::size_t j0 = 0; j0 < candidates.rows(); j0 += block) {
      const std::size_t j1 = std::min(candidates.rows(), j0 + block);
      for (std::size_t i = i0; i < i1; ++i) {
        if (targets[i].empty()) continue;
        const auto q = queries.row(i);
        for (std::size_t j = j0; j < j1; ++j) scores[j - j0] = cosine_from_dot(dot(q, candidates.row(j)), nq[i], nc[j]);
        const auto& ts = target_scores[i - i0];
        for (std::size_t k = 0; k < targets[i].size(); ++k) {
          const std::size_t t = targets[i][k];
          const double st = ts[k];
          std::size_t ahead = 0;
          for (std::size_t j = j0; j < j1; ++j) {
            const double s = scores[j - j0];
            ahead += (s > st) || (s == st && j < t);
          }
          ranks[i][k] += ahead;
        }
      }
    }
  }
  return ranks;
}

}  // namespace bkr
