#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bkr/metrics.hpp"
#include "bkr/synth.hpp"

namespace bkr::experiment {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kDefaultSeedCount = 25;

// How the BkR/CORR subsets are drawn from secretly parallel data.
//   disjoint:    source and target rows come from disjoint item sets
//   independent: two independent uniform draws (items may overlap, order shuffled)
enum class NonMatching { kDisjoint, kIndependent };

enum class DataKind { kFiles, kSynthetic };

struct ModelSpec {
  std::string model_id;
  std::map<std::string, std::filesystem::path> text_matrices;  // files: language -> matrix
  double noise = 0.0;                                           // synthetic
};

struct ExperimentManifest {
  DataKind kind = DataKind::kSynthetic;
  std::filesystem::path source_manifest;
  std::filesystem::path target_manifest;
  bool parallel = false;
  synth::SynthConfig synth;
  bool world_per_seed = false;  // synthetic: regenerate world and models from each run seed
  std::vector<ModelSpec> models;
  EvalConfig eval;
  NonMatching non_matching = NonMatching::kDisjoint;
  std::vector<std::uint64_t> seeds;

  // Effective manifest (overrides applied, paths as written); hashed into the report.
  nlohmann::json effective;
};

// Throws Error(kInvalidConfig) on any schema or validation problem, including
// unresolvable paths. Relative paths resolve against base_dir.
ExperimentManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentManifest load_manifest(const std::filesystem::path& path);

// CLI overrides; both re-validate and refresh `effective`.
void override_k(ExperimentManifest& manifest, std::size_t k);
void override_seeds(ExperimentManifest& manifest, std::vector<std::uint64_t> seeds);

std::string manifest_digest(const nlohmann::json& effective);

struct Dispersion {
  double mean = 0.0;
  std::optional<double> std_dev;
  std::optional<double> std_error;
  std::size_t count = 0;

  friend bool operator==(const Dispersion&, const Dispersion&) = default;
};

struct CorrelationSet {
  std::optional<double> pearson_bkr;
  std::optional<double> spearman_bkr;
  std::optional<double> pearson_corr;
  std::optional<double> spearman_corr;

  friend bool operator==(const CorrelationSet&, const CorrelationSet&) = default;
};

struct ScoreRow {
  std::string model_id;
  std::string source_language;
  std::string target_language;
  std::optional<double> xlr;  // absent without ground-truth pairing
  double bkr = 0.0;
  double corr = 0.0;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<ScoreRow> scores;
  CorrelationSet correlations;

  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct ModelAggregate {
  std::string model_id;
  std::optional<Dispersion> xlr;
  Dispersion bkr;
  Dispersion corr;

  friend bool operator==(const ModelAggregate&, const ModelAggregate&) = default;
};

struct Aggregate {
  std::map<std::string, std::optional<Dispersion>> correlations;  // pearson_bkr, spearman_bkr, ...
  std::vector<ModelAggregate> models;
  std::optional<double> p_pearson;   // BkR vs CORR, paired over seeds
  std::optional<double> p_spearman;

  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct Decisions {
  std::size_t k = 10;
  std::size_t sample_size = 0;
  std::size_t corr_pair_budget = 0;
  std::string corr_pairs;  // "full" or "sampled"
  std::string non_matching;
  std::string tie_policy;
  std::map<std::string, std::string> dispersion_labels;
  std::string significance_test;

  friend bool operator==(const Decisions&, const Decisions&) = default;
};

struct Report {
  int schema_version = kSchemaVersion;
  std::string manifest_digest;
  std::vector<SeedResult> per_seed;
  Aggregate aggregate;
  Decisions decisions;

  friend bool operator==(const Report&, const Report&) = default;
};

// Recomputes every aggregate field from per_seed alone.
Aggregate compute_aggregate(const std::vector<SeedResult>& per_seed);

// Called once per (seed, model) with the BkR traces and the subsets they index.
using TraceSink = std::function<void(std::uint64_t seed, const std::string& model_id, const BackRetrievalResult&,
                                     const PairedDataset& source, const PairedDataset& target)>;

Report run_experiment(const ExperimentManifest& manifest, const ExecutionPolicy& exec = {},
                      const TraceSink& sink = {});

enum class Format { kJson, kCsv };

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);

// JSON: the full report. CSV: one row per (seed, model) with columns
//   seed,model_id,source_language,target_language,xlr,bkr,corr
std::string serialize(const Report& report, Format format);
void report_emit(const Report& report, const std::filesystem::path& path, Format format);

// Merges reports over disjoint seed sets produced from compatible manifests.
Report merge_reports(const std::vector<Report>& reports);

// Per-seed correlation of two score columns (xlr, bkr, corr) across models.
struct ColumnCorrelation {
  std::string x;
  std::string y;
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<double>> pearson;
  std::vector<std::optional<double>> spearman;
  std::optional<Dispersion> pearson_aggregate;
  std::optional<Dispersion> spearman_aggregate;
};

ColumnCorrelation correlate_columns(const std::vector<SeedResult>& per_seed, const std::string& x,
                                    const std::string& y);
std::vector<SeedResult> scores_from_csv(std::istream& in);
std::string serialize(const ColumnCorrelation& result, Format format);

// Writes the world and the simulated models as EMB1 files plus an `eval`
// manifest that reproduces the synthetic run's per-seed results.
std::filesystem::path export_synthetic(const ExperimentManifest& manifest, const std::filesystem::path& dir);

}  // namespace bkr::experiment
