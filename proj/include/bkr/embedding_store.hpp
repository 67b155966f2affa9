#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bkr {

// Dense row-major float matrix with one opaque string id per row. Immutable
// once constructed; the constructor enforces shape, finiteness and, when the
// matrix claims to be unit-normalized, per-row norms.
class EmbeddingMatrix {
 public:
  static constexpr double kUnitNormTolerance = 1e-4;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::vector<float> data, std::vector<std::string> ids,
                  bool unit_normalized = false);

  [[nodiscard]] std::size_t rows() const noexcept { return ids_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] bool unit_normalized() const noexcept { return unit_normalized_; }

  [[nodiscard]] std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  [[nodiscard]] const std::string& id(std::size_t i) const noexcept { return ids_[i]; }
  [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t dim_ = 1;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  bool unit_normalized_ = false;
};

// Rows are positional pairs: text row i describes image row i.
struct PairedDataset {
  std::string language;
  EmbeddingMatrix text;
  EmbeddingMatrix image;

  [[nodiscard]] std::size_t rows() const noexcept { return text.rows(); }
};

// Checks row counts, positional id agreement and id uniqueness.
PairedDataset make_paired_dataset(std::string language, EmbeddingMatrix text, EmbeddingMatrix image);

// Binary "EMB1" format, little-endian:
//   magic "EMB1" | u32 version = 1 | u32 rows | u32 dim | rows*dim f32 | rows x (u32 len, utf-8 id)
EmbeddingMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

EmbeddingMatrix normalize(const EmbeddingMatrix& matrix);

// Manifest: {"language": ..., "text_matrix": ..., "image_matrix": ...}. Relative
// paths resolve against the manifest's directory.
PairedDataset load_dataset(const std::filesystem::path& manifest_path);
void save_dataset(const PairedDataset& dataset, const std::filesystem::path& manifest_path);

EmbeddingMatrix select_rows(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows);
PairedDataset select_rows(const PairedDataset& dataset, std::span<const std::size_t> rows);

// n rows uniformly without replacement, in draw order.
PairedDataset subsample(const PairedDataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace bkr
