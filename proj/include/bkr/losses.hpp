#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bkr/embedding_store.hpp"

namespace bkr::losses {

// Row r carries a recipe's body representation, its title representation and
// its language tag.
struct RecipeBatch {
  EmbeddingMatrix body;
  EmbeddingMatrix title;
  std::vector<std::string> languages;

  void validate() const;
  [[nodiscard]] std::size_t rows() const noexcept { return body.rows(); }
};

struct LossConfig {
  double margin = 0.1;
  double xl_weight = 0.01;
  std::size_t neighbor_count = 5;

  void validate() const;
};

// 1 - cosine(u, v), in [0, 2].
double cosine_distance(std::span<const float> u, std::span<const float> v);

// max(0, d(body, title) - d(body, negative_title) + margin)
double triplet_loss(std::span<const float> body, std::span<const float> title, std::span<const float> negative_title,
                    double margin);

// The k rows of language `language` whose titles are closest to row r's body,
// ordered by distance then index. Row r never neighbours itself.
std::vector<std::size_t> language_neighborhoods(std::size_t r, const RecipeBatch& batch, const std::string& language,
                                                std::size_t k);

// Sum over other languages l of |mean_l - mean_own|, where mean_x is the mean
// body-to-title distance over row r's k nearest neighbours in language x.
double xl_penalty(std::size_t r, const RecipeBatch& batch, std::size_t k);

// triplet_loss(body_r, title_r, title_negative) + xl_weight * xl_penalty(r).
double combined_loss(std::size_t r, const RecipeBatch& batch, std::size_t negative_index, const LossConfig& cfg);

}  // namespace bkr::losses
