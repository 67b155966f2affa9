#include "bkr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bkr/error.hpp"
#include "bkr/random.hpp"
#include "bkr/stats.hpp"

namespace bkr::experiment {

namespace {

using nlohmann::json;

enum Stream : std::uint64_t {
  kSamplingStream = 0x5a4d,
  kCorrStream = 0xc022,
  kModelStream = 1000,
  kHubStream = 2000,
};

const char* kCorrelationKeys[] = {"pearson_bkr", "spearman_bkr", "pearson_corr", "spearman_corr"};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); }

const json& require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) invalid(where + ": missing field '" + key + "'");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require_field(obj, key, where);
  if (!v.is_string()) invalid(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::uint64_t get_uint(const json& obj, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    invalid(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_real(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) invalid(where + "." + key + " must be a number");
  return v.get<double>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::filesystem::path existing(const std::filesystem::path& base, const std::string& p, const std::string& what) {
  auto path = resolve(base, p);
  if (!std::filesystem::exists(path)) invalid(what + " not found: " + path.string());
  return path;
}

std::string dataset_language(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    invalid(manifest_path.string() + ": " + e.what());
  }
  return require_string(doc, "language", manifest_path.string());
}

const char* non_matching_name(NonMatching mode) {
  return mode == NonMatching::kDisjoint ? "disjoint" : "independent";
}

void validate(const ExperimentManifest& m) {
  if (m.models.empty()) invalid("manifest lists no models");
  if (m.seeds.empty()) invalid("manifest lists no seeds");
  m.eval.validate();
  std::set<std::uint64_t> unique_seeds(m.seeds.begin(), m.seeds.end());
  if (unique_seeds.size() != m.seeds.size()) invalid("seed list contains duplicates");
  if (m.kind == DataKind::kSynthetic) {
    m.synth.validate();
    const std::size_t need = m.non_matching == NonMatching::kDisjoint ? 2 * m.eval.sample_size : m.eval.sample_size;
    if (need > m.synth.n_items) {
      invalid("synthetic world of " + std::to_string(m.synth.n_items) + " items cannot supply " +
              std::to_string(need) + " rows for " + non_matching_name(m.non_matching) + " sampling");
    }
  }
}

// Source/target images plus every model's text for both languages, all row-aligned.
struct Corpus {
  PairedDataset source;
  PairedDataset target;
  std::vector<synth::ModelTexts> texts;
  bool parallel = false;
};

EmbeddingMatrix load_model_text(const ModelSpec& model, const PairedDataset& dataset) {
  const auto& path = model.text_matrices.at(dataset.language);
  EmbeddingMatrix text;
  try {
    text = load_matrix(path);
  } catch (const Error& e) {
    throw Error(e.code(), "model '" + model.model_id + "' (" + dataset.language + "): " + e.what());
  }
  if (text.rows() != dataset.rows()) {
    throw Error(ErrorCode::kCountMismatch, "model '" + model.model_id + "' (" + dataset.language + ") has " +
                                               std::to_string(text.rows()) + " rows, dataset has " +
                                               std::to_string(dataset.rows()));
  }
  if (text.ids() != dataset.image.ids()) {
    throw Error(ErrorCode::kCountMismatch,
                "model '" + model.model_id + "' (" + dataset.language + ") ids do not match dataset rows");
  }
  return text;
}

Corpus build_corpus(const ExperimentManifest& m, std::uint64_t run_seed) {
  Corpus corpus;
  if (m.kind == DataKind::kSynthetic) {
    auto cfg = m.synth;
    if (m.world_per_seed) cfg.seed = derive_seed(m.synth.seed, run_seed);
    auto world = synth::generate_world(cfg);
    for (std::size_t i = 0; i < m.models.size(); ++i) {
      auto texts = synth::simulate_model(world, m.models[i].noise, derive_seed(cfg.seed, kModelStream + i));
      if (cfg.hub_count > 0) {
        texts.target_text = synth::inject_hubs(texts.target_text, cfg.hub_count, cfg.hub_strength,
                                               derive_seed(cfg.seed, kHubStream + i));
      }
      corpus.texts.push_back(std::move(texts));
    }
    corpus.source = std::move(world.source);
    corpus.target = std::move(world.target);
    corpus.parallel = true;
    return corpus;
  }

  corpus.source = load_dataset(m.source_manifest);
  corpus.target = load_dataset(m.target_manifest);
  corpus.parallel = m.parallel;
  if (corpus.parallel && corpus.source.rows() != corpus.target.rows()) {
    throw Error(ErrorCode::kCountMismatch, "parallel datasets differ in size: " +
                                               std::to_string(corpus.source.rows()) + " vs " +
                                               std::to_string(corpus.target.rows()));
  }
  for (const auto& model : m.models) {
    corpus.texts.push_back(synth::ModelTexts{load_model_text(model, corpus.source), load_model_text(model, corpus.target)});
  }
  return corpus;
}

std::optional<double> guarded(const std::function<double()>& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUndefinedCorrelation) return std::nullopt;
    throw;
  }
}

std::optional<Dispersion> disperse(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  Dispersion d;
  d.count = values.size();
  if (values.size() == 1) {
    d.mean = values.front();
    return d;
  }
  const auto agg = stats::aggregate_seeds(values);
  d.mean = agg.mean;
  d.std_dev = agg.std_dev;
  d.std_error = agg.std_error;
  return d;
}

std::optional<double> CorrelationSet::*member_for(const std::string& key) {
  if (key == "pearson_bkr") return &CorrelationSet::pearson_bkr;
  if (key == "spearman_bkr") return &CorrelationSet::spearman_bkr;
  if (key == "pearson_corr") return &CorrelationSet::pearson_corr;
  return &CorrelationSet::spearman_corr;
}

std::optional<double> paired_p(const std::vector<SeedResult>& per_seed, const std::string& bkr_key,
                               const std::string& corr_key) {
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& s : per_seed) {
    const auto& x = s.correlations.*member_for(bkr_key);
    const auto& y = s.correlations.*member_for(corr_key);
    if (x && y) {
      a.push_back(*x);
      b.push_back(*y);
    }
  }
  if (a.size() < 6) return std::nullopt;
  return stats::paired_significance(a, b, 0);
}

CorrelationSet correlate(const std::vector<ScoreRow>& scores) {
  CorrelationSet out;
  if (scores.size() < 2) return out;
  std::vector<double> xlr;
  std::vector<double> bkr;
  std::vector<double> corr;
  for (const auto& s : scores) {
    if (!s.xlr) return out;
    xlr.push_back(*s.xlr);
    bkr.push_back(s.bkr);
    corr.push_back(s.corr);
  }
  out.pearson_bkr = guarded([&] { return stats::pearson(xlr, bkr); });
  out.spearman_bkr = guarded([&] { return stats::spearman(xlr, bkr); });
  out.pearson_corr = guarded([&] { return stats::pearson(xlr, corr); });
  out.spearman_corr = guarded([&] { return stats::spearman(xlr, corr); });
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json dispersion_json(const std::optional<Dispersion>& d) {
  if (!d) return nullptr;
  return json{{"mean", d->mean}, {"std", opt(d->std_dev)}, {"stderr", opt(d->std_error)}, {"count", d->count}};
}

std::optional<Dispersion> dispersion_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  Dispersion d;
  d.mean = v.at("mean").get<double>();
  d.std_dev = opt_from(v.at("std"));
  d.std_error = opt_from(v.at("stderr"));
  d.count = v.at("count").get<std::size_t>();
  return d;
}

Decisions make_decisions(const ExperimentManifest& m) {
  Decisions d;
  d.k = m.eval.k;
  d.sample_size = m.eval.sample_size;
  d.corr_pair_budget = m.eval.corr_pair_budget;
  d.corr_pairs = m.eval.sample_size <= m.eval.corr_pair_budget / m.eval.sample_size ? "full" : "sampled";
  d.non_matching = non_matching_name(m.non_matching);
  d.tie_policy = kTiePolicy;
  d.dispersion_labels = {{"std", "sample standard deviation over seeds (n-1 denominator)"},
                         {"stderr", "standard error of the mean over seeds (std / sqrt(n))"}};
  d.significance_test =
      "two-sided paired sign-flip permutation test on per-seed BkR vs CORR correlations "
      "(exact for n <= 20, else 100000 Monte Carlo flips)";
  return d;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kInvalidConfig, "cannot parse " + what + " '" + s + "'");
  }
  return v;
}

std::optional<double> column(const ScoreRow& row, const std::string& name) {
  if (name == "xlr") return row.xlr;
  if (name == "bkr") return row.bkr;
  if (name == "corr") return row.corr;
  invalid("unknown score column '" + name + "' (expected xlr, bkr or corr)");
}

}  // namespace

ExperimentManifest parse_manifest(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) invalid("manifest must be a JSON object");
  ExperimentManifest m;
  m.effective = doc;

  const auto& datasets = require_field(doc, "datasets", "manifest");
  std::string source_language;
  std::string target_language;
  if (datasets.contains("synth")) {
    const auto& s = datasets.at("synth");
    const std::string where = "datasets.synth";
    m.kind = DataKind::kSynthetic;
    m.synth.n_items = get_uint(s, "n_items", m.synth.n_items, where);
    m.synth.dim = get_uint(s, "dim", m.synth.dim, where);
    m.synth.image_noise = get_real(s, "image_noise", m.synth.image_noise, where);
    m.synth.hub_count = get_uint(s, "hub_count", 0, where);
    m.synth.hub_strength = get_real(s, "hub_strength", 0.0, where);
    m.synth.seed = get_uint(s, "seed", 0, where);
    if (s.contains("world_per_seed")) {
      if (!s.at("world_per_seed").is_boolean()) invalid(where + ".world_per_seed must be a boolean");
      m.world_per_seed = s.at("world_per_seed").get<bool>();
    }
    if (s.contains("source_language")) m.synth.source_language = require_string(s, "source_language", where);
    if (s.contains("target_language")) m.synth.target_language = require_string(s, "target_language", where);
    m.parallel = true;
  } else {
    m.kind = DataKind::kFiles;
    m.source_manifest = existing(base_dir, require_string(datasets, "source", "datasets"), "source dataset manifest");
    m.target_manifest = existing(base_dir, require_string(datasets, "target", "datasets"), "target dataset manifest");
    if (datasets.contains("parallel")) {
      if (!datasets.at("parallel").is_boolean()) invalid("datasets.parallel must be a boolean");
      m.parallel = datasets.at("parallel").get<bool>();
    }
    source_language = dataset_language(m.source_manifest);
    target_language = dataset_language(m.target_manifest);
    if (source_language == target_language) invalid("source and target datasets share language '" + source_language + "'");
  }

  const auto& models = require_field(doc, "models", "manifest");
  if (!models.is_array() || models.empty()) invalid("models must be a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& entry = models[i];
    const std::string where = "models[" + std::to_string(i) + "]";
    ModelSpec spec;
    spec.model_id = require_string(entry, "model_id", where);
    if (!ids.insert(spec.model_id).second) invalid("duplicate model_id '" + spec.model_id + "'");
    if (m.kind == DataKind::kSynthetic) {
      const auto& noise = require_field(entry, "noise", where);
      if (!noise.is_number()) invalid(where + ".noise must be a number");
      spec.noise = noise.get<double>();
      if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) invalid(where + ".noise must be a finite number >= 0");
    } else {
      const auto& mats = require_field(entry, "text_matrices", where);
      if (!mats.is_object()) invalid(where + ".text_matrices must be an object");
      for (const auto& lang : {source_language, target_language}) {
        spec.text_matrices[lang] =
            existing(base_dir, require_string(mats, lang.c_str(), where + ".text_matrices"), where + " text matrix");
      }
    }
    m.models.push_back(std::move(spec));
  }
  if (m.kind == DataKind::kSynthetic) {
    m.synth.model_noises.clear();
    for (const auto& spec : m.models) m.synth.model_noises.push_back(spec.noise);
  }

  const json eval = doc.contains("eval") ? doc.at("eval") : json::object();
  if (!eval.is_object()) invalid("eval must be an object");
  m.eval.k = get_uint(eval, "k", 10, "eval");
  m.eval.sample_size = get_uint(eval, "sample_size", 1000, "eval");
  m.eval.corr_pair_budget = get_uint(eval, "corr_pair_budget", 1'000'000, "eval");
  if (eval.contains("non_matching")) {
    const auto mode = require_string(eval, "non_matching", "eval");
    if (mode == "disjoint") {
      m.non_matching = NonMatching::kDisjoint;
    } else if (mode == "independent") {
      m.non_matching = NonMatching::kIndependent;
    } else {
      invalid("eval.non_matching must be 'disjoint' or 'independent'");
    }
  }

  if (doc.contains("seeds")) {
    const auto& seeds = doc.at("seeds");
    if (!seeds.is_array()) invalid("seeds must be an array");
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        invalid("seeds must be non-negative integers");
      }
      m.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    for (std::uint64_t s = 0; s < kDefaultSeedCount; ++s) m.seeds.push_back(s);
    m.effective["seeds"] = m.seeds;
  }
  validate(m);
  return m;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

void override_k(ExperimentManifest& manifest, std::size_t k) {
  manifest.eval.k = k;
  manifest.effective["eval"]["k"] = k;
  validate(manifest);
}

void override_seeds(ExperimentManifest& manifest, std::vector<std::uint64_t> seeds) {
  manifest.seeds = std::move(seeds);
  manifest.effective["seeds"] = manifest.seeds;
  validate(manifest);
}

std::string manifest_digest(const json& effective) {
  const std::string canonical = effective.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

Aggregate compute_aggregate(const std::vector<SeedResult>& per_seed) {
  Aggregate agg;
  for (const char* key : kCorrelationKeys) {
    std::vector<double> values;
    for (const auto& s : per_seed) {
      if (const auto& v = s.correlations.*member_for(key)) values.push_back(*v);
    }
    agg.correlations[key] = disperse(values);
  }
  if (!per_seed.empty()) {
    for (std::size_t mi = 0; mi < per_seed.front().scores.size(); ++mi) {
      ModelAggregate ma;
      ma.model_id = per_seed.front().scores[mi].model_id;
      std::vector<double> xlr;
      std::vector<double> bkr;
      std::vector<double> corr;
      bool all_xlr = true;
      for (const auto& s : per_seed) {
        const auto& row = s.scores.at(mi);
        if (row.model_id != ma.model_id) throw Error(ErrorCode::kInvariant, "model order differs across seeds");
        bkr.push_back(row.bkr);
        corr.push_back(row.corr);
        if (row.xlr) {
          xlr.push_back(*row.xlr);
        } else {
          all_xlr = false;
        }
      }
      if (all_xlr) ma.xlr = disperse(xlr);
      ma.bkr = *disperse(bkr);
      ma.corr = *disperse(corr);
      agg.models.push_back(std::move(ma));
    }
  }
  agg.p_pearson = paired_p(per_seed, "pearson_bkr", "pearson_corr");
  agg.p_spearman = paired_p(per_seed, "spearman_bkr", "spearman_corr");
  return agg;
}

Report run_experiment(const ExperimentManifest& manifest, const ExecutionPolicy& exec, const TraceSink& sink) {
  validate(manifest);
  const bool rebuild = manifest.kind == DataKind::kSynthetic && manifest.world_per_seed;
  Corpus corpus;
  if (!rebuild) corpus = build_corpus(manifest, 0);

  Report report;
  report.manifest_digest = manifest_digest(manifest.effective);
  report.decisions = make_decisions(manifest);

  for (const auto seed : manifest.seeds) {
    if (rebuild) corpus = build_corpus(manifest, seed);
    const std::size_t n = manifest.eval.sample_size;
    const std::size_t ms = corpus.source.rows();
    const std::size_t mt = corpus.target.rows();
    const bool disjoint = corpus.parallel && manifest.non_matching == NonMatching::kDisjoint;
    if ((disjoint && 2 * n > ms) || n > ms || n > mt) {
      throw Error(ErrorCode::kInsufficientRows, "sample_size " + std::to_string(n) + " with " +
                                                    non_matching_name(manifest.non_matching) +
                                                    " sampling needs more rows than " + std::to_string(ms) + " / " +
                                                    std::to_string(mt));
    }
    Rng rng(derive_seed(seed, kSamplingStream));
    std::vector<std::size_t> xlr_rows;
    if (corpus.parallel) xlr_rows = rng.sample_without_replacement(ms, n);
    std::vector<std::size_t> source_rows;
    std::vector<std::size_t> target_rows;
    if (disjoint) {
      auto drawn = rng.sample_without_replacement(ms, 2 * n);
      source_rows.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(n));
      target_rows.assign(drawn.begin() + static_cast<std::ptrdiff_t>(n), drawn.end());
    } else {
      source_rows = rng.sample_without_replacement(ms, n);
      target_rows = rng.sample_without_replacement(mt, n);
    }
    EvalConfig cfg = manifest.eval;
    cfg.seed = derive_seed(seed, kCorrStream);

    const auto source_images = select_rows(corpus.source.image, source_rows);
    const auto target_images = select_rows(corpus.target.image, target_rows);

    SeedResult result;
    result.seed = seed;
    for (std::size_t mi = 0; mi < manifest.models.size(); ++mi) {
      const auto& model = manifest.models[mi];
      const auto& texts = corpus.texts[mi];
      try {
        ScoreRow row;
        row.model_id = model.model_id;
        row.source_language = corpus.source.language;
        row.target_language = corpus.target.language;
        if (corpus.parallel) {
          row.xlr = xlr_recall(select_rows(texts.source_text, xlr_rows), select_rows(texts.target_text, xlr_rows),
                               cfg.k, exec)
                        .recall;
        }
        const PairedDataset source{corpus.source.language, select_rows(texts.source_text, source_rows), source_images};
        const PairedDataset target{corpus.target.language, select_rows(texts.target_text, target_rows), target_images};
        const auto bkr = backretrieval(source, target, cfg, exec);
        row.bkr = bkr.recall;
        row.corr = corr_baseline(source, target, cfg, exec).coefficient;
        if (sink) sink(seed, model.model_id, bkr, source, target);
        result.scores.push_back(std::move(row));
      } catch (const Error& e) {
        throw Error(e.code(), "model '" + model.model_id + "', seed " + std::to_string(seed) + ", " +
                                  corpus.source.language + "->" + corpus.target.language + ": " + e.what());
      }
    }
    result.correlations = correlate(result.scores);
    report.per_seed.push_back(std::move(result));
  }
  report.aggregate = compute_aggregate(report.per_seed);
  return report;
}

json to_json(const Report& report) {
  json per_seed = json::array();
  for (const auto& s : report.per_seed) {
    json scores = json::array();
    for (const auto& row : s.scores) {
      scores.push_back(json{{"model_id", row.model_id},
                            {"source_language", row.source_language},
                            {"target_language", row.target_language},
                            {"xlr", opt(row.xlr)},
                            {"bkr", row.bkr},
                            {"corr", row.corr}});
    }
    json corr = json::object();
    for (const char* key : kCorrelationKeys) corr[key] = opt(s.correlations.*member_for(key));
    per_seed.push_back(json{{"seed", s.seed}, {"scores", std::move(scores)}, {"correlations", std::move(corr)}});
  }

  json correlations = json::object();
  for (const auto& [key, d] : report.aggregate.correlations) correlations[key] = dispersion_json(d);
  json models = json::array();
  for (const auto& m : report.aggregate.models) {
    models.push_back(json{{"model_id", m.model_id},
                          {"xlr", dispersion_json(m.xlr)},
                          {"bkr", dispersion_json(m.bkr)},
                          {"corr", dispersion_json(m.corr)}});
  }
  json aggregate{{"correlations", std::move(correlations)},
                 {"models", std::move(models)},
                 {"significance", {{"pearson", opt(report.aggregate.p_pearson)},
                                   {"spearman", opt(report.aggregate.p_spearman)}}}};

  const auto& d = report.decisions;
  json decisions{{"k", d.k},
                 {"sample_size", d.sample_size},
                 {"corr_pair_budget", d.corr_pair_budget},
                 {"corr_pairs", d.corr_pairs},
                 {"non_matching_sampling", d.non_matching},
                 {"tie_policy", d.tie_policy},
                 {"dispersion_labels", d.dispersion_labels},
                 {"significance_test", d.significance_test}};

  return json{{"schema_version", report.schema_version},
              {"manifest_digest", report.manifest_digest},
              {"per_seed", std::move(per_seed)},
              {"aggregate", std::move(aggregate)},
              {"decisions", std::move(decisions)}};
}

Report report_from_json(const json& doc) {
  try {
    Report r;
    r.schema_version = doc.at("schema_version").get<int>();
    if (r.schema_version != kSchemaVersion) invalid("unsupported report schema_version " + std::to_string(r.schema_version));
    r.manifest_digest = doc.at("manifest_digest").get<std::string>();
    for (const auto& s : doc.at("per_seed")) {
      SeedResult sr;
      sr.seed = s.at("seed").get<std::uint64_t>();
      for (const auto& row : s.at("scores")) {
        sr.scores.push_back(ScoreRow{row.at("model_id").get<std::string>(), row.at("source_language").get<std::string>(),
                                     row.at("target_language").get<std::string>(), opt_from(row.at("xlr")),
                                     row.at("bkr").get<double>(), row.at("corr").get<double>()});
      }
      const auto& c = s.at("correlations");
      for (const char* key : kCorrelationKeys) sr.correlations.*member_for(key) = opt_from(c.at(key));
      r.per_seed.push_back(std::move(sr));
    }
    const auto& agg = doc.at("aggregate");
    for (const auto& [key, v] : agg.at("correlations").items()) r.aggregate.correlations[key] = dispersion_from(v);
    for (const auto& m : agg.at("models")) {
      ModelAggregate ma;
      ma.model_id = m.at("model_id").get<std::string>();
      ma.xlr = dispersion_from(m.at("xlr"));
      ma.bkr = dispersion_from(m.at("bkr")).value();
      ma.corr = dispersion_from(m.at("corr")).value();
      r.aggregate.models.push_back(std::move(ma));
    }
    r.aggregate.p_pearson = opt_from(agg.at("significance").at("pearson"));
    r.aggregate.p_spearman = opt_from(agg.at("significance").at("spearman"));
    const auto& d = doc.at("decisions");
    r.decisions.k = d.at("k").get<std::size_t>();
    r.decisions.sample_size = d.at("sample_size").get<std::size_t>();
    r.decisions.corr_pair_budget = d.at("corr_pair_budget").get<std::size_t>();
    r.decisions.corr_pairs = d.at("corr_pairs").get<std::string>();
    r.decisions.non_matching = d.at("non_matching_sampling").get<std::string>();
    r.decisions.tie_policy = d.at("tie_policy").get<std::string>();
    r.decisions.dispersion_labels = d.at("dispersion_labels").get<std::map<std::string, std::string>>();
    r.decisions.significance_test = d.at("significance_test").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    invalid(std::string("malformed report: ") + e.what());
  }
}

std::string serialize(const Report& report, Format format) {
  if (format == Format::kJson) return to_json(report).dump(2) + "\n";
  std::ostringstream out;
  out << "seed,model_id,source_language,target_language,xlr,bkr,corr\n";
  for (const auto& s : report.per_seed) {
    for (const auto& row : s.scores) {
      out << s.seed << ',' << csv_field(row.model_id) << ',' << csv_field(row.source_language) << ','
          << csv_field(row.target_language) << ',' << (row.xlr ? format_double(*row.xlr) : "") << ','
          << format_double(row.bkr) << ',' << format_double(row.corr) << '\n';
    }
  }
  return out.str();
}

void report_emit(const Report& report, const std::filesystem::path& path, Format format) {
  const auto text = serialize(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Report merge_reports(const std::vector<Report>& reports) {
  if (reports.empty()) invalid("no reports to merge");
  Report merged;
  merged.decisions = reports.front().decisions;
  std::set<std::uint64_t> seeds;
  std::string digests;
  for (const auto& r : reports) {
    if (r.schema_version != kSchemaVersion) invalid("report schema version mismatch");
    if (!(r.decisions == merged.decisions)) invalid("reports were produced under different decisions");
    digests += r.manifest_digest;
    for (const auto& s : r.per_seed) {
      if (!seeds.insert(s.seed).second) invalid("seed " + std::to_string(s.seed) + " appears in more than one report");
      if (!merged.per_seed.empty()) {
        const auto& ref = merged.per_seed.front().scores;
        bool same = ref.size() == s.scores.size();
        for (std::size_t i = 0; same && i < ref.size(); ++i) same = ref[i].model_id == s.scores[i].model_id;
        if (!same) invalid("reports evaluate different model rosters");
      }
      merged.per_seed.push_back(s);
    }
  }
  merged.manifest_digest = manifest_digest(json{{"merged", digests}});
  merged.aggregate = compute_aggregate(merged.per_seed);
  return merged;
}

ColumnCorrelation correlate_columns(const std::vector<SeedResult>& per_seed, const std::string& x,
                                    const std::string& y) {
  ColumnCorrelation out{x, y, {}, {}, {}, std::nullopt, std::nullopt};
  std::vector<double> ps;
  std::vector<double> ss;
  for (const auto& s : per_seed) {
    std::vector<double> xs;
    std::vector<double> ys;
    bool complete = s.scores.size() >= 2;
    for (const auto& row : s.scores) {
      const auto vx = column(row, x);
      const auto vy = column(row, y);
      if (!vx || !vy) {
        complete = false;
        break;
      }
      xs.push_back(*vx);
      ys.push_back(*vy);
    }
    std::optional<double> p;
    std::optional<double> r;
    if (complete) {
      p = guarded([&] { return stats::pearson(xs, ys); });
      r = guarded([&] { return stats::spearman(xs, ys); });
    }
    if (p) ps.push_back(*p);
    if (r) ss.push_back(*r);
    out.seeds.push_back(s.seed);
    out.pearson.push_back(p);
    out.spearman.push_back(r);
  }
  out.pearson_aggregate = disperse(ps);
  out.spearman_aggregate = disperse(ss);
  return out;
}

std::vector<SeedResult> scores_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) invalid("empty score CSV");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"seed", "model_id", "source_language", "target_language", "xlr", "bkr", "corr"};
  if (header != expected) invalid("score CSV header must be: seed,model_id,source_language,target_language,xlr,bkr,corr");
  std::vector<SeedResult> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected.size()) invalid("score CSV line " + std::to_string(line_no) + ": wrong field count");
    std::uint64_t seed = 0;
    const auto res = std::from_chars(f[0].data(), f[0].data() + f[0].size(), seed);
    if (res.ec != std::errc() || res.ptr != f[0].data() + f[0].size()) {
      invalid("score CSV line " + std::to_string(line_no) + ": bad seed '" + f[0] + "'");
    }
    ScoreRow row{f[1], f[2], f[3], std::nullopt, parse_double(f[5], "bkr"), parse_double(f[6], "corr")};
    if (!f[4].empty()) row.xlr = parse_double(f[4], "xlr");
    auto it = std::find_if(out.begin(), out.end(), [&](const SeedResult& s) { return s.seed == seed; });
    if (it == out.end()) {
      out.push_back(SeedResult{seed, {}, {}});
      it = std::prev(out.end());
    }
    it->scores.push_back(std::move(row));
  }
  for (auto& s : out) s.correlations = correlate(s.scores);
  return out;
}

std::string serialize(const ColumnCorrelation& result, Format format) {
  if (format == Format::kCsv) {
    std::ostringstream out;
    out << "seed,pearson,spearman\n";
    for (std::size_t i = 0; i < result.seeds.size(); ++i) {
      out << result.seeds[i] << ',' << (result.pearson[i] ? format_double(*result.pearson[i]) : "") << ','
          << (result.spearman[i] ? format_double(*result.spearman[i]) : "") << '\n';
    }
    return out.str();
  }
  json per_seed = json::array();
  for (std::size_t i = 0; i < result.seeds.size(); ++i) {
    per_seed.push_back(json{{"seed", result.seeds[i]}, {"pearson", opt(result.pearson[i])},
                            {"spearman", opt(result.spearman[i])}});
  }
  json doc{{"schema_version", kSchemaVersion},
           {"x", result.x},
           {"y", result.y},
           {"per_seed", std::move(per_seed)},
           {"aggregate",
            {{"pearson", dispersion_json(result.pearson_aggregate)},
             {"spearman", dispersion_json(result.spearman_aggregate)}}}};
  return doc.dump(2) + "\n";
}

std::filesystem::path export_synthetic(const ExperimentManifest& manifest, const std::filesystem::path& dir) {
  if (manifest.kind != DataKind::kSynthetic) invalid("export needs a synthetic manifest");
  if (manifest.world_per_seed) invalid("a world_per_seed manifest has no single world to export");
  std::filesystem::create_directories(dir);
  const Corpus corpus = build_corpus(manifest, 0);
  save_dataset(corpus.source, dir / "source.json");
  save_dataset(corpus.target, dir / "target.json");

  json models = json::array();
  for (std::size_t i = 0; i < manifest.models.size(); ++i) {
    const std::string stem = "model" + std::to_string(i);
    const std::string src_file = stem + "." + corpus.source.language + ".emb";
    const std::string tgt_file = stem + "." + corpus.target.language + ".emb";
    save_matrix(corpus.texts[i].source_text, dir / src_file);
    save_matrix(corpus.texts[i].target_text, dir / tgt_file);
    models.push_back(json{{"model_id", manifest.models[i].model_id},
                          {"text_matrices", {{corpus.source.language, src_file}, {corpus.target.language, tgt_file}}}});
  }
  json doc{{"datasets", {{"source", "source.json"}, {"target", "target.json"}, {"parallel", true}}},
           {"models", std::move(models)},
           {"eval",
            {{"k", manifest.eval.k},
             {"sample_size", manifest.eval.sample_size},
             {"corr_pair_budget", manifest.eval.corr_pair_budget},
             {"non_matching", non_matching_name(manifest.non_matching)}}},
           {"seeds", manifest.seeds}};
  const auto path = dir / "experiment.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  return path;
}

}  // namespace bkr::experiment
