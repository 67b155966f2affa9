#include "bkr/synth.hpp"

#include <cmath>

#include "bkr/error.hpp"
#include "bkr/random.hpp"

namespace bkr::synth {

namespace {

enum Stream : std::uint64_t { kLatent = 1, kSourceImage = 2, kTargetImage = 3, kSourceText = 4, kTargetText = 5 };

std::vector<std::string> make_ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + "-" + std::to_string(i));
  return ids;
}

void normalize_into(const std::vector<double>& v, float* out) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double n = std::sqrt(ss);
  if (!(n > 1e-12)) throw Error(ErrorCode::kZeroNorm, "synthetic vector collapsed to zero");
  for (std::size_t c = 0; c < v.size(); ++c) out[c] = static_cast<float>(v[c] / n);
}

// normalize(base_i + sigma * eps_i) for every row; sigma == 0 copies base exactly.
EmbeddingMatrix perturb(const EmbeddingMatrix& base, double sigma, std::uint64_t seed, std::vector<std::string> ids) {
  const std::size_t dim = base.dim();
  std::vector<float> data(base.data().begin(), base.data().end());
  if (sigma > 0.0) {
    Rng rng(seed);
    const double scale = sigma / std::sqrt(static_cast<double>(dim));
    std::vector<double> v(dim);
    for (std::size_t r = 0; r < base.rows(); ++r) {
      const auto row = base.row(r);
      for (std::size_t c = 0; c < dim; ++c) v[c] = static_cast<double>(row[c]) + scale * rng.normal();
      normalize_into(v, data.data() + r * dim);
    }
  }
  return EmbeddingMatrix(dim, std::move(data), std::move(ids), true);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_items < 10) throw Error(ErrorCode::kInvalidConfig, "n_items must be >= 10");
  if (dim < 2) throw Error(ErrorCode::kInvalidConfig, "dim must be >= 2");
  if (!(image_noise >= 0.0) || !std::isfinite(image_noise)) {
    throw Error(ErrorCode::kInvalidConfig, "image_noise must be finite and >= 0");
  }
  if (model_noises.empty()) throw Error(ErrorCode::kInvalidConfig, "model_noises must be non-empty");
  for (double s : model_noises) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::kInvalidConfig, "model noise must be finite and >= 0");
  }
  if (hub_count > n_items) throw Error(ErrorCode::kInvalidConfig, "hub_count exceeds n_items");
  if (!(hub_strength >= 0.0 && hub_strength <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "hub_strength must lie in [0, 1]");
  }
  if (source_language == target_language) {
    throw Error(ErrorCode::kInvalidConfig, "source and target languages must differ");
  }
}

SynthWorld generate_world(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_items;
  const std::size_t dim = cfg.dim;

  std::vector<float> latent(n * dim);
  {
    Rng rng(derive_seed(cfg.seed, kLatent));
    std::vector<double> v(dim);
    for (std::size_t r = 0; r < n; ++r) {
      for (auto& x : v) x = rng.normal();
      normalize_into(v, latent.data() + r * dim);
    }
  }
  EmbeddingMatrix latent_matrix(dim, std::move(latent), make_ids("item", n), true);

  auto source_ids = make_ids(cfg.source_language, n);
  auto target_ids = make_ids(cfg.target_language, n);
  auto source_image = perturb(latent_matrix, cfg.image_noise, derive_seed(cfg.seed, kSourceImage), source_ids);
  auto target_image = perturb(latent_matrix, cfg.image_noise, derive_seed(cfg.seed, kTargetImage), target_ids);
  auto source_text = perturb(latent_matrix, 0.0, 0, source_ids);
  auto target_text = perturb(latent_matrix, 0.0, 0, target_ids);

  SynthWorld world{std::move(latent_matrix),
                   make_paired_dataset(cfg.source_language, std::move(source_text), std::move(source_image)),
                   make_paired_dataset(cfg.target_language, std::move(target_text), std::move(target_image))};
  return world;
}

ModelTexts simulate_model(const SynthWorld& world, double noise, std::uint64_t seed) {
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw Error(ErrorCode::kInvalidConfig, "model noise must be finite and >= 0");
  }
  return ModelTexts{perturb(world.latent, noise, derive_seed(seed, kSourceText), world.source.text.ids()),
                    perturb(world.latent, noise, derive_seed(seed, kTargetText), world.target.text.ids())};
}

EmbeddingMatrix inject_hubs(const EmbeddingMatrix& matrix, std::size_t hub_count, double hub_strength,
                            std::uint64_t seed) {
  if (hub_count > matrix.rows()) {
    throw Error(ErrorCode::kInvalidConfig, "hub_count " + std::to_string(hub_count) + " exceeds rows " +
                                               std::to_string(matrix.rows()));
  }
  if (!(hub_strength >= 0.0 && hub_strength <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "hub_strength must lie in [0, 1]");
  }
  const std::size_t dim = matrix.dim();
  std::vector<float> data(matrix.data().begin(), matrix.data().end());
  if (hub_count == 0 || hub_strength == 0.0) {
    return EmbeddingMatrix(dim, std::move(data), matrix.ids(), matrix.unit_normalized());
  }

  std::vector<double> centroid(dim, 0.0);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const auto row = matrix.row(r);
    for (std::size_t c = 0; c < dim; ++c) centroid[c] += row[c];
  }
  double cn = 0.0;
  for (double x : centroid) cn += x * x;
  cn = std::sqrt(cn);
  if (!(cn > 1e-12)) throw Error(ErrorCode::kZeroNorm, "data centroid is the zero vector");
  for (double& x : centroid) x /= cn;

  Rng rng(seed);
  const auto hubs = rng.sample_without_replacement(matrix.rows(), hub_count);
  std::vector<double> v(dim);
  for (auto r : hubs) {
    const auto row = matrix.row(r);
    for (std::size_t c = 0; c < dim; ++c) {
      v[c] = (1.0 - hub_strength) * static_cast<double>(row[c]) + hub_strength * centroid[c];
    }
    normalize_into(v, data.data() + r * dim);
  }
  return EmbeddingMatrix(dim, std::move(data), matrix.ids(), matrix.unit_normalized());
}

PairedDataset with_text(const PairedDataset& dataset, EmbeddingMatrix text) {
  return make_paired_dataset(dataset.language, std::move(text), dataset.image);
}

}  // namespace bkr::synth
