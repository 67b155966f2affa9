#pragma once

// Straight-line reference implementations used only by tests. They share no
// code with the library: plain sequential loops, explicit materialization and
// full sorts, chosen for obviousness rather than speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double cosine(const Vec& u, const Vec& v) {
  double uv = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

// Candidate indices sorted by descending similarity, ties by ascending index.
inline std::vector<std::size_t> sorted_candidates(const Vec& query, const Mat& candidates) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < candidates.size(); ++j) scored.emplace_back(cosine(query, candidates[j]), j);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> order;
  for (const auto& s : scored) order.push_back(s.second);
  return order;
}

inline std::size_t rank(std::size_t target, const Vec& query, const Mat& candidates) {
  const auto order = sorted_candidates(query, candidates);
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
}

inline std::size_t top1(const Vec& query, const Mat& candidates) { return sorted_candidates(query, candidates).front(); }

inline double recall(const std::vector<std::size_t>& ranks, std::size_t k) {
  std::size_t hits = 0;
  for (auto r : ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

struct BackRetrieval {
  std::vector<std::size_t> retrieved;
  std::vector<std::size_t> back_ranks;
};

inline BackRetrieval backretrieval(const Mat& src_text, const Mat& src_image, const Mat& tgt_text, const Mat& tgt_image) {
  BackRetrieval out;
  for (std::size_t q = 0; q < src_text.size(); ++q) {
    const auto t = top1(src_text[q], tgt_text);
    out.retrieved.push_back(t);
    out.back_ranks.push_back(rank(q, tgt_image[t], src_image));
  }
  return out;
}

inline std::vector<std::size_t> xlr_ranks(const Mat& src, const Mat& tgt) {
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < src.size(); ++i) ranks.push_back(rank(i, src[i], tgt));
  return ranks;
}

// Rank of each value: 1 + (#smaller) + (#equal - 1) / 2, by direct counting.
inline Vec average_ranks(const Vec& xs) {
  Vec r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (double x : xs) {
      less += x < xs[i] ? 1.0 : 0.0;
      equal += x == xs[i] ? 1.0 : 0.0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const Vec& xs, const Vec& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    syy += ys[i] * ys[i];
    sxy += xs[i] * ys[i];
  }
  // textbook single-pass form
  return (n * sxy - sx * sy) / (std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy));
}

inline double spearman(const Vec& xs, const Vec& ys) { return pearson(average_ranks(xs), average_ranks(ys)); }

inline double corr(const Mat& st, const Mat& si, const Mat& tt, const Mat& ti) {
  Vec text_d;
  Vec image_d;
  for (std::size_t i = 0; i < st.size(); ++i) {
    for (std::size_t j = 0; j < tt.size(); ++j) {
      text_d.push_back(1.0 - cosine(st[i], tt[j]));
      image_d.push_back(1.0 - cosine(si[i], ti[j]));
    }
  }
  return spearman(text_d, image_d);
}

// Exhaustive sign flips; p = #{|mean of flipped| >= |observed mean|} / 2^n.
inline double permutation_p(const Vec& a, const Vec& b) {
  const std::size_t n = a.size();
  Vec d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double observed = std::abs(std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n));
  std::size_t extreme = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += ((mask >> i) & 1U) ? -d[i] : d[i];
    if (std::abs(s / static_cast<double>(n)) >= observed - 1e-12) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

inline std::vector<std::size_t> neighbourhood(std::size_t r, const Mat& body, const Mat& title,
                                              const std::vector<std::string>& langs, const std::string& lang,
                                              std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t n = 0; n < body.size(); ++n) {
    if (n != r && langs[n] == lang) all.emplace_back(1.0 - cosine(body[r], title[n]), n);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

inline double xl_penalty(std::size_t r, const Mat& body, const Mat& title, const std::vector<std::string>& langs,
                         std::size_t k) {
  auto mean_d = [&](const std::string& l) {
    double s = 0.0;
    for (auto n : neighbourhood(r, body, title, langs, l, k)) s += 1.0 - cosine(body[r], title[n]);
    return s / static_cast<double>(k);
  };
  const double own = mean_d(langs[r]);
  double total = 0.0;
  for (const auto& l : std::set<std::string>(langs.begin(), langs.end())) {
    if (l != langs[r]) total += std::abs(mean_d(l) - own);
  }
  return total;
}

// Random float-valued matrix with an occasional exact duplicate row to exercise ties.
inline Mat random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t dim, double dup_rate = 0.1) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Mat m(rows, Vec(dim));
  for (std::size_t r = 0; r < rows; ++r) {
    if (r > 0 && unit(gen) < dup_rate) {
      m[r] = m[std::uniform_int_distribution<std::size_t>(0, r - 1)(gen)];
      continue;
    }
    for (auto& x : m[r]) x = static_cast<double>(static_cast<float>(normal(gen)));
  }
  return m;
}

}  // namespace oracle
