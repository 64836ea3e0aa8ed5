#pragma once

// Embedding reliability metrics: global distance agreement (Spearman, stress,
// mean distance ratio), neighborhood preservation (trustworthiness,
// continuity), label separation (silhouette) and local outlier factors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vistune/core.hpp"
#include "vistune/distance.hpp"

namespace vistune {

namespace detail {

inline void require_same_size(const DistanceMatrix& hd, const DistanceMatrix& ld,
                              const char* who) {
  if (hd.size() != ld.size()) {
    throw InputError(std::string(who) + ": point counts differ (" + std::to_string(hd.size()) +
                     " vs " + std::to_string(ld.size()) + ")");
  }
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline void check_neighborhood(std::size_t n, std::size_t k, const char* who) {
  if (k < 1 || 2 * k >= n) {
    throw InputError(std::string(who) + ": k=" + std::to_string(k) +
                     " out of range; valid range is 1 <= k < n/2 = " +
                     std::to_string(n) + "/2");
  }
}

// Penalized rank sum shared by trustworthiness and continuity: for every j that
// is a k-neighbor under `observed` but not under `reference`, add
// (reference rank - k).
inline double rank_penalty_score(const DistanceMatrix& reference, const DistanceMatrix& observed,
                                 std::size_t k) {
  const std::size_t n = reference.size();
  const RankMatrix ref(reference);
  const RankMatrix obs(observed);
  double penalty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::size_t rr = ref.neighbor_rank(i, j);
      if (obs.neighbor_rank(i, j) <= k && rr > k) penalty += static_cast<double>(rr - k);
    }
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  return 1.0 - 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0)) * penalty;
}

}  // namespace detail

/// Rank correlation between the pairwise distances of two spaces.
inline double spearman_distance_score(const DistanceMatrix& hd, const DistanceMatrix& ld) {
  detail::require_same_size(hd, ld, "spearman_distance_score");
  if (hd.size() < 3) throw InputError("spearman_distance_score: need n >= 3");
  const std::vector<double> hd_pairs = hd.pairs();
  const std::vector<double> ld_pairs = ld.pairs();
  auto all_equal = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (all_equal(hd_pairs) || all_equal(ld_pairs)) {
    throw InputError("spearman_distance_score: all distances equal, correlation undefined");
  }
  const auto hd_ranks = RankMatrix::average_ranks(hd_pairs);
  const auto ld_ranks = RankMatrix::average_ranks(ld_pairs);
  double rho;
  if (!RankMatrix::has_ties(hd_pairs) && !RankMatrix::has_ties(ld_pairs)) {
    const double np = static_cast<double>(hd_pairs.size());
    double sum_sq = 0.0;
    for (std::size_t p = 0; p < hd_ranks.size(); ++p) {
      const double diff = hd_ranks[p] - ld_ranks[p];
      sum_sq += diff * diff;
    }
    rho = 1.0 - 6.0 * sum_sq / (np * (np * np - 1.0));
  } else {
    rho = detail::pearson(hd_ranks, ld_ranks);
  }
  return std::clamp(rho, -1.0, 1.0);
}

/// Normalized stress between mean-normalized distance matrices.
inline double stress(const DistanceMatrix& hd, const DistanceMatrix& ld) {
  detail::require_same_size(hd, ld, "stress");
  if (hd.mean_offdiagonal() == 0.0) throw InputError("stress: high-dimensional distances all zero");
  const DistanceMatrix h = hd.mean_normalized();
  const DistanceMatrix l = ld.mean_normalized();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      const double diff = l(i, j) - h(i, j);
      num += diff * diff;
      den += h(i, j) * h(i, j);
    }
  }
  return std::sqrt(num / den);
}

/// Mean of low/high distance ratios over all pairs (mean-normalized matrices).
inline double mean_distance_ratio(const DistanceMatrix& hd, const DistanceMatrix& ld) {
  detail::require_same_size(hd, ld, "mean_distance_ratio");
  for (std::size_t i = 0; i < hd.size(); ++i) {
    for (std::size_t j = i + 1; j < hd.size(); ++j) {
      if (hd(i, j) == 0.0) {
        throw InputError("mean_distance_ratio: zero high-dimensional distance between points " +
                         std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
  const DistanceMatrix h = hd.mean_normalized();
  const DistanceMatrix l = ld.mean_normalized();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      sum += l(i, j) / h(i, j);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

/// Penalizes low-dimensional k-neighbors that are not high-dimensional k-neighbors.
inline double trustworthiness(const DistanceMatrix& hd, const DistanceMatrix& ld, std::size_t k) {
  detail::require_same_size(hd, ld, "trustworthiness");
  detail::check_neighborhood(hd.size(), k, "trustworthiness");
  return detail::rank_penalty_score(hd, ld, k);
}

/// Penalizes high-dimensional k-neighbors missing from the low-dimensional
/// neighborhood. Equal to trustworthiness with the arguments swapped.
inline double continuity(const DistanceMatrix& hd, const DistanceMatrix& ld, std::size_t k) {
  detail::require_same_size(hd, ld, "continuity");
  detail::check_neighborhood(hd.size(), k, "continuity");
  return detail::rank_penalty_score(ld, hd, k);
}

/// Integer codes for labels in first-appearance order.
struct LabelCodes {
  std::vector<std::size_t> codes;
  std::vector<std::string> names;
};

inline LabelCodes encode_labels(const Labels& labels) {
  LabelCodes out;
  std::map<std::string, std::size_t> index;
  out.codes.reserve(labels.size());
  for (const auto& label : labels) {
    auto [it, inserted] = index.emplace(label, out.names.size());
    if (inserted) out.names.push_back(label);
    out.codes.push_back(it->second);
  }
  return out;
}

/// Mean silhouette over all points; nullopt when fewer than two labels exist.
/// Points alone in their cluster score 0.
inline std::optional<double> silhouette(const DataMatrix& embedding, const Labels& labels) {
  if (labels.size() != embedding.rows()) {
    throw InputError("silhouette: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(embedding.rows()) + " rows");
  }
  const LabelCodes enc = encode_labels(labels);
  const std::size_t clusters = enc.names.size();
  if (clusters < 2) return std::nullopt;
  const std::size_t n = embedding.rows();
  const DistanceMatrix d = pairwise_distances(embedding);
  std::vector<std::size_t> sizes(clusters, 0);
  for (auto c : enc.codes) ++sizes[c];

  double total = 0.0;
  std::vector<double> sums(clusters);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = enc.codes[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[enc.codes[j]] += d(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters; ++c) {
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return std::clamp(total / static_cast<double>(n), -1.0, 1.0);
}

/// Largest local reachability density reported; duplicates hit this cap.
inline constexpr double kLofDensityCap = 1e12;

struct LofResult {
  std::vector<double> scores;
  double median = 0.0;
  std::size_t outlier_count = 0;
  double threshold = 1.5;
  std::size_t k = 0;
};

inline double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

inline LofResult lof_scores(const DataMatrix& embedding, std::size_t k, double threshold = 1.5) {
  const std::size_t n = embedding.rows();
  if (k < 1 || k >= n) {
    throw InputError("lof_scores: k=" + std::to_string(k) + " must satisfy 1 <= k < n=" +
                     std::to_string(n));
  }
  const DistanceMatrix d = pairwise_distances(embedding);

  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<double> k_distance(n);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
                      });
    neighbors[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    k_distance[i] = d(i, neighbors[i].back());
  }

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (auto j : neighbors[i]) reach += std::max(k_distance[j], d(i, j));
    const double mean_reach = reach / static_cast<double>(k);
    lrd[i] = mean_reach > 0.0 ? std::min(1.0 / mean_reach, kLofDensityCap) : kLofDensityCap;
  }

  LofResult result;
  result.k = k;
  result.threshold = threshold;
  result.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (auto j : neighbors[i]) sum += lrd[j];
    result.scores[i] = sum / static_cast<double>(k) / lrd[i];
    if (result.scores[i] > threshold) ++result.outlier_count;
  }
  result.median = median_of(result.scores);
  return result;
}

struct ScoreAtK {
  double value = 0.0;
  std::size_t k = 0;
  friend bool operator==(const ScoreAtK&, const ScoreAtK&) = default;
};

struct LofSummary {
  double median = 0.0;
  std::size_t outlier_count = 0;
  double threshold = 1.5;
  std::size_t k = 0;
  friend bool operator==(const LofSummary&, const LofSummary&) = default;
};

struct SampleInfo {
  std::size_t total = 0;
  std::size_t used = 0;
  std::uint64_t seed = 0;
  bool subsampled() const { return used < total; }
  friend bool operator==(const SampleInfo&, const SampleInfo&) = default;
};

struct MetricsReport {
  double spearman = 0.0;
  double stress = 0.0;
  double mean_distance_ratio = 0.0;
  ScoreAtK trustworthiness;
  ScoreAtK continuity;
  std::optional<double> silhouette;
  LofSummary lof;
  std::vector<std::pair<std::string, std::size_t>> label_summary;
  std::vector<std::pair<std::string, std::array<double, 2>>> centroids_2d;
  SampleInfo sample;
  // Extra neighborhood scores requested by the agent, e.g. {"Trustworthiness", k=30}.
  std::vector<std::pair<std::string, ScoreAtK>> follow_up;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct ReportOptions {
  std::size_t k = 10;
  std::size_t lof_k = 20;
  double lof_threshold = 1.5;
  std::size_t max_points = 2000;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::size_t>> follow_up;  // "Trustworthiness"/"Continuity", k
};

/// Sorted indices of a uniform subsample of `count` out of `total` rows.
inline std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t count,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= total) return all;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit index draw keeps the result
  // independent of the standard library's distribution implementations.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (total - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

/// Computes every field of a MetricsReport. `hd` is the reference
/// representation (normally the PCA input fed to the DR method). k values that
/// do not fit the (sub)sample are reduced to the largest valid value and the
/// effective k is recorded.
inline MetricsReport assemble_report(const DataMatrix& hd, const DataMatrix& embedding,
                                     const Labels& labels, const ReportOptions& options = {}) {
  const std::size_t n = hd.rows();
  if (embedding.rows() != n) {
    throw InputError("assemble_report: " + std::to_string(n) + " reference rows but " +
                     std::to_string(embedding.rows()) + " embedding rows");
  }
  if (!labels.empty() && labels.size() != n) {
    throw InputError("assemble_report: label count " + std::to_string(labels.size()) +
                     " does not match row count " + std::to_string(n));
  }
  if (embedding.cols() != 2) throw InputError("assemble_report: embedding must have 2 columns");

  MetricsReport report;
  report.sample.total = n;
  report.sample.seed = options.seed;
  const auto idx = subsample_indices(n, std::min(n, options.max_points), options.seed);
  report.sample.used = idx.size();
  const std::size_t m = idx.size();
  if (m < 3) throw InputError("assemble_report: need at least 3 points");

  const DataMatrix hd_s = report.sample.subsampled() ? hd.select_rows(idx) : hd;
  const DataMatrix ld_s = report.sample.subsampled() ? embedding.select_rows(idx) : embedding;
  Labels labels_s;
  if (!labels.empty()) {
    labels_s.reserve(m);
    for (auto i : idx) labels_s.push_back(labels[i]);
  }

  const DistanceMatrix dh = pairwise_distances(hd_s);
  const DistanceMatrix dl = pairwise_distances(ld_s);
  report.spearman = spearman_distance_score(dh, dl);
  report.stress = stress(dh, dl);
  report.mean_distance_ratio = mean_distance_ratio(dh, dl);

  const std::size_t k = std::clamp<std::size_t>(options.k, 1, (m - 1) / 2);
  report.trustworthiness = {trustworthiness(dh, dl, k), k};
  report.continuity = {continuity(dh, dl, k), k};
  for (const auto& [name, requested] : options.follow_up) {
    const std::size_t fk = std::clamp<std::size_t>(requested, 1, (m - 1) / 2);
    const bool seen = fk == k || std::any_of(report.follow_up.begin(), report.follow_up.end(),
                                             [&](const auto& f) { return f.first == name && f.second.k == fk; });
    if (seen) continue;
    if (name == "Trustworthiness") {
      report.follow_up.push_back({name, {trustworthiness(dh, dl, fk), fk}});
    } else if (name == "Continuity") {
      report.follow_up.push_back({name, {continuity(dh, dl, fk), fk}});
    } else {
      throw InputError("unsupported follow-up metric '" + name + "'");
    }
  }

  if (!labels_s.empty()) report.silhouette = silhouette(ld_s, labels_s);

  const std::size_t lof_k = std::clamp<std::size_t>(options.lof_k, 1, m - 1);
  const LofResult lof = lof_scores(ld_s, lof_k, options.lof_threshold);
  report.lof = {lof.median, lof.outlier_count, lof.threshold, lof.k};

  if (!labels.empty()) {
    const LabelCodes enc = encode_labels(labels);
    std::vector<std::size_t> counts(enc.names.size(), 0);
    std::vector<std::array<double, 2>> sums(enc.names.size(), {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = enc.codes[i];
      ++counts[c];
      sums[c][0] += embedding(i, 0);
      sums[c][1] += embedding(i, 1);
    }
    for (std::size_t c = 0; c < enc.names.size(); ++c) {
      report.label_summary.emplace_back(enc.names[c], counts[c]);
      const double cnt = static_cast<double>(counts[c]);
      report.centroids_2d.push_back({enc.names[c], {sums[c][0] / cnt, sums[c][1] / cnt}});
    }
  } else {
    report.label_summary.emplace_back("(unlabeled)", n);
  }
  return report;
}

}  // namespace vistune
