#include "bkr/metrics.hpp"

#include <algorithm>
#include <map>

#include "bkr/error.hpp"
#include "bkr/random.hpp"
#include "bkr/stats.hpp"

namespace bkr {

namespace {

void require_comparable(const PairedDataset& source, const PairedDataset& target) {
  if (source.rows() == 0 || target.rows() == 0) {
    throw Error(ErrorCode::kEmpty, "dataset '" + (source.rows() == 0 ? source.language : target.language) +
                                       "' has no rows");
  }
  if (source.text.dim() != target.text.dim()) {
    throw Error(ErrorCode::kDimMismatch, "text dims " + std::to_string(source.text.dim()) + " vs " +
                                             std::to_string(target.text.dim()));
  }
  if (source.image.dim() != target.image.dim()) {
    throw Error(ErrorCode::kDimMismatch, "image dims " + std::to_string(source.image.dim()) + " vs " +
                                             std::to_string(target.image.dim()));
  }
}

void require_k(std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "recall cutoff k must be >= 1");
}

}  // namespace

void EvalConfig::validate() const {
  require_k(k);
  if (sample_size < k) {
    throw Error(ErrorCode::kInvalidConfig, "sample_size " + std::to_string(sample_size) + " < k " + std::to_string(k));
  }
  if (corr_pair_budget < 1000) {
    throw Error(ErrorCode::kInvalidConfig, "corr_pair_budget must be >= 1000");
  }
}

double recall_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw Error(ErrorCode::kEmpty, "recall over an empty rank list");
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "K must be >= 1");
  std::size_t hits = 0;
  for (auto r : ranks) {
    if (r == 0) throw Error(ErrorCode::kInvariant, "ranks are 1-based");
    hits += r <= k;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

RecallResult xlr_recall(const EmbeddingMatrix& source_text, const EmbeddingMatrix& target_text, std::size_t k,
                        const ExecutionPolicy& exec) {
  require_k(k);
  if (source_text.rows() != target_text.rows()) {
    throw Error(ErrorCode::kCountMismatch, "matched retrieval needs equal rows: " +
                                               std::to_string(source_text.rows()) + " vs " +
                                               std::to_string(target_text.rows()));
  }
  if (source_text.dim() != target_text.dim()) {
    throw Error(ErrorCode::kDimMismatch, std::to_string(source_text.dim()) + " vs " +
                                             std::to_string(target_text.dim()));
  }
  if (source_text.rows() == 0) throw Error(ErrorCode::kEmpty, "no queries");

  std::vector<std::vector<std::size_t>> targets(source_text.rows());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = {i};
  const auto nested = batch_ranks(source_text, target_text, targets, exec);

  RecallResult result;
  result.ranks.reserve(nested.size());
  for (const auto& r : nested) result.ranks.push_back(r.front());
  result.recall = recall_from_ranks(result.ranks, k);
  return result;
}

BackRetrievalResult backretrieval(const PairedDataset& source, const PairedDataset& target, const EvalConfig& cfg,
                                  const ExecutionPolicy& exec) {
  require_k(cfg.k);
  require_comparable(source, target);

  const auto retrieved = top1_indices(source.text, target.text, exec);

  // Queries that retrieved the same target share one image ranking pass.
  std::map<std::size_t, std::vector<std::size_t>> by_target;
  for (std::size_t q = 0; q < retrieved.size(); ++q) by_target[retrieved[q]].push_back(q);

  std::vector<std::size_t> distinct;
  std::vector<std::vector<std::size_t>> members;
  distinct.reserve(by_target.size());
  members.reserve(by_target.size());
  for (auto& [t, qs] : by_target) {
    distinct.push_back(t);
    members.push_back(std::move(qs));
  }
  const auto pivots = select_rows(target.image, distinct);
  const auto ranks = batch_ranks(pivots, source.image, members, exec);

  BackRetrievalResult result;
  result.traces.resize(source.rows());
  std::vector<std::size_t> back_ranks(source.rows());
  for (std::size_t d = 0; d < distinct.size(); ++d) {
    for (std::size_t m = 0; m < members[d].size(); ++m) {
      const std::size_t q = members[d][m];
      result.traces[q] = RetrievalTrace{q, distinct[d], ranks[d][m]};
      back_ranks[q] = ranks[d][m];
    }
  }
  for (auto r : back_ranks) {
    if (r < 1 || r > source.rows()) throw Error(ErrorCode::kInvariant, "back rank out of range");
  }
  result.recall = recall_from_ranks(back_ranks, cfg.k);
  return result;
}

CorrResult corr_baseline(const PairedDataset& source, const PairedDataset& target, const EvalConfig& cfg,
                         const ExecutionPolicy& exec) {
  require_comparable(source, target);
  if (cfg.corr_pair_budget == 0) throw Error(ErrorCode::kInvalidConfig, "corr_pair_budget must be positive");

  const std::size_t ns = source.rows();
  const std::size_t nt = target.rows();
  CorrResult result;
  std::vector<double> text_d;
  std::vector<double> image_d;

  if (ns <= cfg.corr_pair_budget / nt) {
    const auto text_sim = pairwise(source.text, target.text, exec);
    const auto image_sim = pairwise(source.image, target.image, exec);
    text_d.reserve(ns * nt);
    image_d.reserve(ns * nt);
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) {
        text_d.push_back(1.0 - text_sim(i, j));
        image_d.push_back(1.0 - image_sim(i, j));
      }
    }
    result.sampled = false;
  } else {
    const auto nst = row_norms(source.text);
    const auto ntt = row_norms(target.text);
    const auto nsi = row_norms(source.image);
    const auto nti = row_norms(target.image);
    const std::size_t m = cfg.corr_pair_budget;
    std::vector<std::size_t> is(m);
    std::vector<std::size_t> js(m);
    Rng rng(cfg.seed);
    for (std::size_t p = 0; p < m; ++p) {
      is[p] = static_cast<std::size_t>(rng.uniform_index(ns));
      js[p] = static_cast<std::size_t>(rng.uniform_index(nt));
    }
    text_d.resize(m);
    image_d.resize(m);
    const auto count = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(exec.resolved_workers())
    for (std::ptrdiff_t p = 0; p < count; ++p) {
      const std::size_t i = is[p];
      const std::size_t j = js[p];
      text_d[p] = 1.0 - cosine_from_dot(dot(source.text.row(i), target.text.row(j)), nst[i], ntt[j]);
      image_d[p] = 1.0 - cosine_from_dot(dot(source.image.row(i), target.image.row(j)), nsi[i], nti[j]);
    }
    result.sampled = true;
  }
  result.pairs = text_d.size();
  result.coefficient = stats::spearman(text_d, image_d);
  return result;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void write_traces_csv(std::ostream& out, std::span<const RetrievalTrace> traces, const PairedDataset& source,
                      const PairedDataset& target) {
  out << "query_id,retrieved_target_id,back_rank\n";
  for (const auto& t : traces) {
    out << csv_field(source.text.id(t.query_index)) << ',' << csv_field(target.text.id(t.retrieved_target_index))
        << ',' << t.back_rank << '\n';
  }
}

}  // namespace bkr
