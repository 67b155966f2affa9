#include "bkr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "bkr/error.hpp"
#include "bkr/sim_engine.hpp"

namespace bkr::losses {

namespace {

void require_row(std::size_t r, const RecipeBatch& batch) {
  if (r >= batch.rows()) {
    throw Error(ErrorCode::kOutOfRange, "row " + std::to_string(r) + " of " + std::to_string(batch.rows()));
  }
}

double mean_distance(std::size_t r, const RecipeBatch& batch, const std::vector<std::size_t>& neighbours) {
  double sum = 0.0;
  for (auto n : neighbours) sum += cosine_distance(batch.body.row(r), batch.title.row(n));
  return sum / static_cast<double>(neighbours.size());
}

}  // namespace

void RecipeBatch::validate() const {
  if (body.rows() != title.rows() || body.rows() != languages.size()) {
    throw Error(ErrorCode::kCountMismatch, "recipe batch: body " + std::to_string(body.rows()) + ", title " +
                                               std::to_string(title.rows()) + ", languages " +
                                               std::to_string(languages.size()));
  }
  if (body.dim() != title.dim()) {
    throw Error(ErrorCode::kDimMismatch, "recipe batch: body dim " + std::to_string(body.dim()) + " vs title dim " +
                                             std::to_string(title.dim()));
  }
}

void LossConfig::validate() const {
  if (!(margin >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "margin must be >= 0");
  if (!(xl_weight >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "xl_weight must be >= 0");
  if (neighbor_count < 1) throw Error(ErrorCode::kInvalidConfig, "neighbor_count must be >= 1");
}

double cosine_distance(std::span<const float> u, std::span<const float> v) { return 1.0 - cosine(u, v); }

double triplet_loss(std::span<const float> body, std::span<const float> title, std::span<const float> negative_title,
                    double margin) {
  if (!(margin >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "margin must be >= 0");
  if (body.size() != title.size() || body.size() != negative_title.size()) {
    throw Error(ErrorCode::kDimMismatch, "triplet_loss operands differ in dimension");
  }
  return std::max(0.0, cosine_distance(body, title) - cosine_distance(body, negative_title) + margin);
}

std::vector<std::size_t> language_neighborhoods(std::size_t r, const RecipeBatch& batch, const std::string& language,
                                                std::size_t k) {
  batch.validate();
  require_row(r, batch);
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "neighbour count must be >= 1");

  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t n = 0; n < batch.rows(); ++n) {
    if (n == r || batch.languages[n] != language) continue;
    candidates.emplace_back(cosine_distance(batch.body.row(r), batch.title.row(n)), n);
  }
  if (candidates.size() < k) {
    throw Error(ErrorCode::kInsufficientRows, "language '" + language + "' has " +
                                                  std::to_string(candidates.size()) + " candidate rows, need " +
                                                  std::to_string(k));
  }
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(candidates[i].second);
  return out;
}

double xl_penalty(std::size_t r, const RecipeBatch& batch, std::size_t k) {
  batch.validate();
  require_row(r, batch);
  const std::set<std::string> languages(batch.languages.begin(), batch.languages.end());
  const std::string& own = batch.languages[r];
  const double own_mean = mean_distance(r, batch, language_neighborhoods(r, batch, own, k));
  double penalty = 0.0;
  for (const auto& l : languages) {
    if (l == own) continue;
    penalty += std::abs(mean_distance(r, batch, language_neighborhoods(r, batch, l, k)) - own_mean);
  }
  return penalty;
}

double combined_loss(std::size_t r, const RecipeBatch& batch, std::size_t negative_index, const LossConfig& cfg) {
  cfg.validate();
  batch.validate();
  require_row(r, batch);
  require_row(negative_index, batch);
  const double triplet =
      triplet_loss(batch.body.row(r), batch.title.row(r), batch.title.row(negative_index), cfg.margin);
  if (cfg.xl_weight == 0.0) return triplet;
  return triplet + cfg.xl_weight * xl_penalty(r, batch, cfg.neighbor_count);
}

}  // namespace bkr::losses
