#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bkr::stats {

// One metric value per model, labelled by model id.
struct MetricSeries {
  std::vector<std::string> labels;
  std::vector<double> values;

  void validate() const;
};

double pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson over average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

// 1-based ranks in ascending order; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct SeedAggregate {
  double mean = 0.0;
  double std_dev = 0.0;   // sample standard deviation, n-1 denominator
  double std_error = 0.0; // std_dev / sqrt(n)
  std::size_t count = 0;
};

SeedAggregate aggregate_seeds(std::span<const double> per_seed_values);

inline constexpr std::size_t kExactFlipLimit = 20;
inline constexpr std::size_t kMonteCarloFlips = 100'000;

// Two-sided paired sign-flip permutation test on the mean difference.
// Exact over all 2^n flips for n <= 20; otherwise Monte Carlo with `seed`.
double paired_significance(std::span<const double> a, std::span<const double> b, std::uint64_t seed = 0);

}  // namespace bkr::stats
