#include "bkr/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <json.hpp>

#include "bkr/error.hpp"
#include "bkr/random.hpp"

namespace bkr {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr double kMinNorm = 1e-12;

static_assert(std::endian::native == std::endian::little,
              "EMB1 I/O assumes a little-endian host");

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float v : row) sum += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sum);
}

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void read(void* out, std::size_t n, ErrorCode on_short, const char* what) {
    if (remaining() < n) throw Error(on_short, origin_ + ": unexpected end of file while reading " + what);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::uint32_t read_u32(ErrorCode on_short, const char* what) {
    std::uint32_t v = 0;
    read(&v, sizeof v, on_short, what);
    return v;
  }

 private:
  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> data, std::vector<std::string> ids,
                                 bool unit_normalized)
    : dim_(dim), data_(std::move(data)), ids_(std::move(ids)), unit_normalized_(unit_normalized) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidConfig, "matrix dim must be >= 1");
  if (data_.size() != ids_.size() * dim_) {
    throw Error(ErrorCode::kCountMismatch, "matrix holds " + std::to_string(data_.size()) + " values but " +
                                               std::to_string(ids_.size()) + " ids x dim " +
                                               std::to_string(dim_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::kNonFinite, "row '" + ids_[i / dim_] + "' column " + std::to_string(i % dim_));
    }
  }
  if (unit_normalized_) {
    for (std::size_t r = 0; r < rows(); ++r) {
      const double n = row_norm(row(r));
      if (std::abs(n - 1.0) > kUnitNormTolerance) {
        throw Error(ErrorCode::kInvariant, "row '" + ids_[r] + "' flagged unit-normalized has norm " +
                                               std::to_string(n));
      }
    }
  }
}

PairedDataset make_paired_dataset(std::string language, EmbeddingMatrix text, EmbeddingMatrix image) {
  if (text.rows() != image.rows()) {
    throw Error(ErrorCode::kCountMismatch, "language '" + language + "': text has " +
                                               std::to_string(text.rows()) + " rows, image has " +
                                               std::to_string(image.rows()));
  }
  std::unordered_set<std::string> seen;
  seen.reserve(text.rows());
  for (std::size_t i = 0; i < text.rows(); ++i) {
    if (text.id(i) != image.id(i)) {
      throw Error(ErrorCode::kCountMismatch, "row " + std::to_string(i) + ": text id '" + text.id(i) +
                                                 "' does not match image id '" + image.id(i) + "'");
    }
    if (!seen.insert(text.id(i)).second) throw Error(ErrorCode::kDuplicateId, "id '" + text.id(i) + "'");
  }
  return PairedDataset{std::move(language), std::move(text), std::move(image)};
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader reader(std::move(bytes), path.string());

  std::array<char, 4> magic{};
  reader.read(magic.data(), magic.size(), ErrorCode::kMalformedHeader, "magic");
  if (magic != kMagic) throw Error(ErrorCode::kMalformedHeader, path.string() + ": bad magic");
  const auto version = reader.read_u32(ErrorCode::kMalformedHeader, "version");
  if (version != kVersion) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto rows = reader.read_u32(ErrorCode::kMalformedHeader, "rows");
  const auto dim = reader.read_u32(ErrorCode::kMalformedHeader, "dim");
  if (dim == 0) throw Error(ErrorCode::kMalformedHeader, path.string() + ": dim is 0");

  const std::size_t count = static_cast<std::size_t>(rows) * dim;
  if (reader.remaining() < count * sizeof(float)) {
    throw Error(ErrorCode::kTruncatedPayload, path.string() + ": expected " + std::to_string(count * sizeof(float)) +
                                                  " payload bytes, found " + std::to_string(reader.remaining()));
  }
  std::vector<float> data(count);
  reader.read(data.data(), count * sizeof(float), ErrorCode::kTruncatedPayload, "payload");

  std::vector<std::string> ids;
  ids.reserve(rows);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const auto len = reader.read_u32(ErrorCode::kCountMismatch, "id length");
    std::string id(len, '\0');
    reader.read(id.data(), len, ErrorCode::kCountMismatch, "id bytes");
    ids.push_back(std::move(id));
  }
  if (reader.remaining() != 0) {
    throw Error(ErrorCode::kCountMismatch, path.string() + ": " + std::to_string(reader.remaining()) +
                                               " trailing bytes after " + std::to_string(rows) + " ids");
  }
  return EmbeddingMatrix(dim, std::move(data), std::move(ids));
}

void save_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  write_u32(out, static_cast<std::uint32_t>(matrix.dim()));
  const auto data = matrix.data();
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  for (const auto& id : matrix.ids()) {
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

EmbeddingMatrix normalize(const EmbeddingMatrix& matrix) {
  std::vector<float> data(matrix.data().begin(), matrix.data().end());
  const std::size_t dim = matrix.dim();
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const double n = row_norm(matrix.row(r));
    if (n <= kMinNorm) throw Error(ErrorCode::kZeroNorm, "row '" + matrix.id(r) + "' has norm " + std::to_string(n));
    for (std::size_t c = 0; c < dim; ++c) {
      data[r * dim + c] = static_cast<float>(static_cast<double>(data[r * dim + c]) / n);
    }
  }
  return EmbeddingMatrix(dim, std::move(data), matrix.ids(), true);
}

PairedDataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, manifest_path.string() + ": " + e.what());
  }
  for (const char* key : {"language", "text_matrix", "image_matrix"}) {
    if (!manifest.contains(key) || !manifest[key].is_string()) {
      throw Error(ErrorCode::kInvalidConfig, manifest_path.string() + ": missing string field '" + key + "'");
    }
  }
  const auto base = manifest_path.parent_path();
  auto text = load_matrix(resolve(base, manifest["text_matrix"].get<std::string>()));
  auto image = load_matrix(resolve(base, manifest["image_matrix"].get<std::string>()));
  return make_paired_dataset(manifest["language"].get<std::string>(), std::move(text), std::move(image));
}

void save_dataset(const PairedDataset& dataset, const std::filesystem::path& manifest_path) {
  const auto stem = manifest_path.stem().string();
  const auto dir = manifest_path.parent_path();
  const std::string text_name = stem + ".text.emb";
  const std::string image_name = stem + ".image.emb";
  save_matrix(dataset.text, dir / text_name);
  save_matrix(dataset.image, dir / image_name);
  nlohmann::json manifest{{"language", dataset.language}, {"text_matrix", text_name}, {"image_matrix", image_name}};
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + manifest_path.string() + " for writing");
  out << manifest.dump(2) << '\n';
}

EmbeddingMatrix select_rows(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows) {
  const std::size_t dim = matrix.dim();
  std::vector<float> data;
  data.reserve(rows.size() * dim);
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) {
    if (r >= matrix.rows()) {
      throw Error(ErrorCode::kOutOfRange, "row " + std::to_string(r) + " of " + std::to_string(matrix.rows()));
    }
    const auto src = matrix.row(r);
    data.insert(data.end(), src.begin(), src.end());
    ids.push_back(matrix.id(r));
  }
  return EmbeddingMatrix(dim, std::move(data), std::move(ids), matrix.unit_normalized());
}

PairedDataset select_rows(const PairedDataset& dataset, std::span<const std::size_t> rows) {
  return PairedDataset{dataset.language, select_rows(dataset.text, rows), select_rows(dataset.image, rows)};
}

PairedDataset subsample(const PairedDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n > dataset.rows()) {
    throw Error(ErrorCode::kInsufficientRows, "cannot draw " + std::to_string(n) + " rows from " +
                                                  std::to_string(dataset.rows()));
  }
  Rng rng(seed);
  const auto picked = rng.sample_without_replacement(dataset.rows(), n);
  return select_rows(dataset, picked);
}

}  // namespace bkr
