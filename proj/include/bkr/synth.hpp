#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bkr/embedding_store.hpp"

namespace bkr::synth {

// Noise vectors have i.i.d. N(0, 1/dim) components, so their expected squared
// norm is 1 and a noise level sigma reads as "noise norm / signal norm".
struct SynthConfig {
  std::size_t n_items = 1000;
  std::size_t dim = 64;
  double image_noise = 0.1;
  std::vector<double> model_noises{0.0};
  std::size_t hub_count = 0;
  double hub_strength = 0.0;
  std::uint64_t seed = 0;
  std::string source_language = "src";
  std::string target_language = "tgt";

  void validate() const;
};

// Two secretly parallel languages over one latent item set: row i of source
// and row i of target describe latent item i. The text slots hold the latent
// itself, i.e. a noiseless model; simulate_model supplies real ones.
struct SynthWorld {
  EmbeddingMatrix latent;
  PairedDataset source;
  PairedDataset target;
};

SynthWorld generate_world(const SynthConfig& cfg);

struct ModelTexts {
  EmbeddingMatrix source_text;
  EmbeddingMatrix target_text;
};

// text_i = normalize(latent_i + noise * eps_i), independently per language.
ModelTexts simulate_model(const SynthWorld& world, double noise, std::uint64_t seed);

// Pulls hub_count random rows toward the normalized data centroid:
// row <- normalize((1 - strength) * row + strength * centroid).
EmbeddingMatrix inject_hubs(const EmbeddingMatrix& matrix, std::size_t hub_count, double hub_strength,
                            std::uint64_t seed);

// Same rows and image, different text.
PairedDataset with_text(const PairedDataset& dataset, EmbeddingMatrix text);

}  // namespace bkr::synth
