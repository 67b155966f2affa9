#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bkr/embedding_store.hpp"
#include "bkr/sim_engine.hpp"

namespace bkr {

struct EvalConfig {
  std::size_t k = 10;
  std::size_t sample_size = 1000;
  std::uint64_t seed = 0;
  std::size_t corr_pair_budget = 1'000'000;

  // Full invariant set: k >= 1, sample_size >= k, corr_pair_budget >= 1000.
  void validate() const;
};

struct RetrievalTrace {
  std::size_t query_index = 0;
  std::size_t retrieved_target_index = 0;
  std::size_t back_rank = 0;

  friend bool operator==(const RetrievalTrace&, const RetrievalTrace&) = default;
};

struct ModelScore {
  std::string model_id;
  std::string source_language;
  std::string target_language;
  double xlr = 0.0;
  double bkr = 0.0;
  double corr = 0.0;
};

struct RecallResult {
  double recall = 0.0;
  std::vector<std::size_t> ranks;
};

struct BackRetrievalResult {
  double recall = 0.0;
  std::vector<RetrievalTrace> traces;
};

struct CorrResult {
  double coefficient = 0.0;
  std::size_t pairs = 0;
  bool sampled = false;
};

double recall_from_ranks(std::span<const std::size_t> ranks, std::size_t k);

// Ground-truth retrieval: source row i must find target row i.
RecallResult xlr_recall(const EmbeddingMatrix& source_text, const EmbeddingMatrix& target_text, std::size_t k,
                        const ExecutionPolicy& exec = {});

// Image-pivoted retrieval. No pairing between the two datasets is read:
//   1. embed (given) 2. nearest target text for each source text
//   3. rank every source image against the retrieved text's image
//   4. Recall@k over the rank of the query's own image.
BackRetrievalResult backretrieval(const PairedDataset& source, const PairedDataset& target, const EvalConfig& cfg,
                                  const ExecutionPolicy& exec = {});

// Spearman between cross-dataset text distances and image distances (1 - cosine).
// Every pair is used when rows(source)*rows(target) <= corr_pair_budget;
// otherwise corr_pair_budget pairs are drawn uniformly with replacement using cfg.seed.
CorrResult corr_baseline(const PairedDataset& source, const PairedDataset& target, const EvalConfig& cfg,
                         const ExecutionPolicy& exec = {});

// RFC 4180 quoting when the value holds a comma, quote or line break.
std::string csv_field(std::string_view value);

// CSV: query_id,retrieved_target_id,back_rank
void write_traces_csv(std::ostream& out, std::span<const RetrievalTrace> traces, const PairedDataset& source,
                      const PairedDataset& target);

}  // namespace bkr
