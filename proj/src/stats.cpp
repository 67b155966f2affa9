#include "bkr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bkr/error.hpp"
#include "bkr/random.hpp"

namespace bkr::stats {

namespace {

constexpr double kOvershoot = 1e-12;

void require_pairable(std::span<const double> xs, std::span<const double> ys, const char* op) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kCountMismatch, std::string(op) + ": lengths " + std::to_string(xs.size()) + " vs " +
                                               std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw Error(ErrorCode::kEmpty, std::string(op) + ": need at least 2 values");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw Error(ErrorCode::kNonFinite, std::string(op) + ": value at " + std::to_string(i));
    }
  }
}

double clamp_coefficient(double r) {
  if (r > 1.0 + kOvershoot || r < -1.0 - kOvershoot) {
    throw Error(ErrorCode::kInvariant, "correlation coefficient out of range: " + std::to_string(r));
  }
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

void MetricSeries::validate() const {
  if (labels.size() != values.size()) throw Error(ErrorCode::kCountMismatch, "labels vs values");
  if (values.size() < 2) throw Error(ErrorCode::kEmpty, "metric series needs at least 2 models");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "metric series value");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw Error(ErrorCode::kDuplicateId, "metric series labels must be unique");
  }
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  require_pairable(xs, ys, "pearson");
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const bool x_const = std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs[0]; });
  const bool y_const = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys[0]; });
  if (x_const || y_const || sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::kUndefinedCorrelation, "pearson: constant series");
  }
  return clamp_coefficient(sxy / std::sqrt(sxx * syy));
}

std::vector<double> average_ranks(std::span<const double> values) {
  // Tied values receive the same averaged rank, so sort stability is irrelevant.
  std::vector<std::pair<double, std::size_t>> order(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) order[i] = {values[i], i};
  std::sort(order.begin(), order.end());
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && order[j].first == order[i].first) ++j;
    // 0-based positions i..j-1 share the mean 1-based rank
    const double shared = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t].second] = shared;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  require_pairable(xs, ys, "spearman");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  try {
    return pearson(rx, ry);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUndefinedCorrelation) {
      throw Error(ErrorCode::kUndefinedCorrelation, "spearman: constant series");
    }
    throw;
  }
}

SeedAggregate aggregate_seeds(std::span<const double> per_seed_values) {
  if (per_seed_values.size() < 2) throw Error(ErrorCode::kEmpty, "aggregate_seeds: need at least 2 values");
  const auto n = static_cast<double>(per_seed_values.size());
  const double mean = std::accumulate(per_seed_values.begin(), per_seed_values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_seed_values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return SeedAggregate{mean, sd, sd / std::sqrt(n), per_seed_values.size()};
}

double paired_significance(std::span<const double> a, std::span<const double> b, std::uint64_t seed) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kCountMismatch, "paired_significance: lengths " + std::to_string(a.size()) + " vs " +
                                               std::to_string(b.size()));
  }
  if (a.size() < 6) throw Error(ErrorCode::kInsufficientRows, "paired_significance: need at least 6 pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];

  // Comparing |sum| is equivalent to comparing |mean| for fixed n. The
  // relative slack absorbs rounding between sums of identical magnitude.
  double observed = 0.0;
  double scale = 0.0;
  for (double d : diff) {
    observed += d;
    scale += std::abs(d);
  }
  observed = std::abs(observed);
  const double slack = 1e-12 * scale;

  const std::size_t n = diff.size();
  if (n <= kExactFlipLimit) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t extreme = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1U) ? -diff[i] : diff[i];
      extreme += std::abs(s) >= observed - slack;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
  }

  Rng rng(seed);
  std::uint64_t extreme = 0;
  for (std::size_t f = 0; f < kMonteCarloFlips; ++f) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; i += 64) {
      const std::uint64_t bits = rng.next_u64();
      const std::size_t end = std::min(n, i + 64);
      for (std::size_t t = i; t < end; ++t) s += (bits >> (t - i) & 1U) ? -diff[t] : diff[t];
    }
    extreme += std::abs(s) >= observed - slack;
  }
  // The observed assignment counts as one member of the permutation set.
  return static_cast<double>(extreme + 1) / static_cast<double>(kMonteCarloFlips + 1);
}

}  // namespace bkr::stats
