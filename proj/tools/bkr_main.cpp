// Command-line driver: evaluates embedding rosters on files or synthetic
// worlds, correlates score columns, and merges reports.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bkr/error.hpp"
#include "bkr/experiment.hpp"

namespace {

namespace fs = std::filesystem;
namespace ex = bkr::experiment;

enum ExitCode { kOk = 0, kValidation = 2, kData = 3, kInternal = 4 };

struct RunOptions {
  std::string manifest;
  std::string out;
  std::string format = "json";
  int workers = 0;
  std::optional<std::size_t> k;
  std::string seed_list;
  std::string traces_dir;
  std::string export_dir;
};

ex::Format parse_format(const std::string& f) {
  return f == "csv" ? ex::Format::kCsv : ex::Format::kJson;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw bkr::Error(bkr::ErrorCode::kInvalidConfig, "bad seed '" + item + "' in --seed-list");
    }
  }
  if (seeds.empty()) throw bkr::Error(bkr::ErrorCode::kInvalidConfig, "--seed-list is empty");
  return seeds;
}

void write_output(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw bkr::Error(bkr::ErrorCode::kIo, "cannot open " + out + " for writing");
  f << text;
}

std::string sanitize(const std::string& id) {
  std::string s = id;
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

int run(const RunOptions& opt, ex::DataKind expected) {
  auto manifest = ex::load_manifest(opt.manifest);
  if (manifest.kind != expected) {
    throw bkr::Error(bkr::ErrorCode::kInvalidConfig,
                     expected == ex::DataKind::kSynthetic ? "synth needs a manifest with datasets.synth"
                                                          : "eval needs a manifest with datasets.source/target");
  }
  if (opt.k) ex::override_k(manifest, *opt.k);
  if (!opt.seed_list.empty()) ex::override_seeds(manifest, parse_seed_list(opt.seed_list));

  if (!opt.export_dir.empty()) {
    const auto path = ex::export_synthetic(manifest, opt.export_dir);
    std::cerr << "exported synthetic world to " << path.string() << "\n";
  }

  bkr::ExecutionPolicy exec;
  exec.workers = opt.workers;
  ex::TraceSink sink;
  if (!opt.traces_dir.empty()) {
    fs::create_directories(opt.traces_dir);
    sink = [&](std::uint64_t seed, const std::string& model_id, const bkr::BackRetrievalResult& result,
               const bkr::PairedDataset& source, const bkr::PairedDataset& target) {
      const auto path = fs::path(opt.traces_dir) / (sanitize(model_id) + ".seed" + std::to_string(seed) + ".csv");
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw bkr::Error(bkr::ErrorCode::kIo, "cannot open " + path.string());
      bkr::write_traces_csv(out, result.traces, source, target);
    };
  }
  const auto report = ex::run_experiment(manifest, exec, sink);
  write_output(ex::serialize(report, parse_format(opt.format)), opt.out);
  return kOk;
}

std::vector<ex::SeedResult> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bkr::Error(bkr::ErrorCode::kIo, "cannot open " + path);
  if (fs::path(path).extension() == ".csv") return ex::scores_from_csv(in);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw bkr::Error(bkr::ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  return ex::report_from_json(doc).per_seed;
}

ex::Report load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bkr::Error(bkr::ErrorCode::kIo, "cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw bkr::Error(bkr::ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  return ex::report_from_json(doc);
}

int exit_code_for(bkr::ErrorCode code) {
  switch (code) {
    case bkr::ErrorCode::kInvalidConfig: return kValidation;
    case bkr::ErrorCode::kInvariant: return kInternal;
    default: return kData;
  }
}

void add_run_options(CLI::App* cmd, RunOptions& opt) {
  cmd->add_option("--manifest", opt.manifest, "Experiment manifest (JSON)")->required();
  cmd->add_option("--out", opt.out, "Report path (default: stdout)");
  cmd->add_option("--format", opt.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--workers", opt.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--k", opt.k, "Override the recall cutoff")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-list", opt.seed_list, "Comma-separated seeds overriding the manifest");
  cmd->add_option("--traces-dir", opt.traces_dir, "Write per-(model, seed) BackRetrieval traces as CSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bkr: image-pivoted evaluation of cross-lingual text embeddings"};
  app.require_subcommand(1);

  RunOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "Evaluate a model roster on dataset files");
  add_run_options(eval, eval_opt);

  RunOptions synth_opt;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic world and evaluate a simulated roster");
  add_run_options(synth, synth_opt);
  synth->add_option("--export-dir", synth_opt.export_dir, "Also write the world as EMB1 files with an eval manifest");

  std::string corr_input;
  std::string corr_x = "xlr";
  std::string corr_y = "bkr";
  std::string corr_out;
  std::string corr_format = "json";
  auto* corr = app.add_subcommand("corr", "Correlate two score columns across models, per seed");
  corr->add_option("--input", corr_input, "Report JSON or score CSV")->required();
  corr->add_option("--x", corr_x, "First column")->check(CLI::IsMember({"xlr", "bkr", "corr"}));
  corr->add_option("--y", corr_y, "Second column")->check(CLI::IsMember({"xlr", "bkr", "corr"}));
  corr->add_option("--out", corr_out, "Output path (default: stdout)");
  corr->add_option("--format", corr_format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  std::vector<std::string> report_inputs;
  std::string report_out;
  std::string report_format = "json";
  auto* report = app.add_subcommand("report", "Merge reports over disjoint seeds and re-aggregate");
  report->add_option("--input", report_inputs, "Report JSON (repeatable)")->required();
  report->add_option("--out", report_out, "Output path (default: stdout)");
  report->add_option("--format", report_format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*eval) return run(eval_opt, ex::DataKind::kFiles);
    if (*synth) return run(synth_opt, ex::DataKind::kSynthetic);
    if (*corr) {
      const auto result = ex::correlate_columns(load_scores(corr_input), corr_x, corr_y);
      write_output(ex::serialize(result, parse_format(corr_format)), corr_out);
      return kOk;
    }
    if (*report) {
      std::vector<ex::Report> reports;
      for (const auto& path : report_inputs) reports.push_back(load_report(path));
      write_output(ex::serialize(ex::merge_reports(reports), parse_format(report_format)), report_out);
      return kOk;
    }
  } catch (const bkr::Error& e) {
    std::cerr << "bkr: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "bkr: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "bkr: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
