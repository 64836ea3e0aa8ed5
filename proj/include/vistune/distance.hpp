#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "vistune/core.hpp"

namespace vistune {

/// Symmetric n x n Euclidean distance matrix with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  /// Wraps a full square matrix after checking symmetry, zero diagonal and
  /// non-negativity. Symmetry is checked exactly.
  static DistanceMatrix from_square(std::size_t n, std::vector<double> values) {
    if (values.size() != n * n) {
      throw InputError("DistanceMatrix: expected " + std::to_string(n * n) + " values");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (values[i * n + i] != 0.0) {
        throw InputError("DistanceMatrix: nonzero diagonal at " + std::to_string(i));
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        const double a = values[i * n + j];
        const double b = values[j * n + i];
        if (!std::isfinite(a) || a < 0.0) {
          throw InputError("DistanceMatrix: invalid entry at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
        }
        if (a != b) {
          throw InputError("DistanceMatrix: not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
        }
      }
    }
    DistanceMatrix d;
    d.n_ = n;
    d.values_ = std::move(values);
    return d;
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Upper-triangle entries (i < j) in row-major order.
  std::vector<double> pairs() const {
    std::vector<double> out;
    out.reserve(n_ * (n_ - 1) / 2);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) out.push_back((*this)(i, j));
    }
    return out;
  }

  double mean_offdiagonal() const {
    if (n_ < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) sum += (*this)(i, j);
    }
    return sum / static_cast<double>(n_ * (n_ - 1) / 2);
  }

  /// Copy divided by the mean off-diagonal distance. An all-zero matrix is
  /// returned unchanged.
  DistanceMatrix mean_normalized() const {
    const double mean = mean_offdiagonal();
    DistanceMatrix out = *this;
    if (mean > 0.0) {
      for (double& v : out.values_) v /= mean;
    }
    return out;
  }

  DistanceMatrix scaled(double factor) const {
    DistanceMatrix out = *this;
    for (double& v : out.values_) v *= factor;
    return out;
  }

 private:
  friend DistanceMatrix pairwise_distances(const DataMatrix&);
  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline DistanceMatrix pairwise_distances(const DataMatrix& matrix) {
  const std::size_t n = matrix.rows();
  if (n < 2) throw InputError("pairwise_distances: need at least 2 rows");
  if (auto bad = matrix.first_nonfinite_row()) {
    throw InputError("pairwise_distances: non-finite value in row " + std::to_string(*bad));
  }
  DistanceMatrix d;
  d.n_ = n;
  d.values_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = matrix.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto b = matrix.row(j);
      double sum = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        sum += diff * diff;
      }
      const double dist = std::sqrt(sum);
      d.values_[i * n + j] = dist;
      d.values_[j * n + i] = dist;
    }
  }
  return d;
}

/// Per-point neighbor ranks and pairwise-distance ranks of one distance matrix.
///
/// `neighbor_rank(i, j)` is the 1-based position of j in the ordering of the
/// other points by distance from i; ties are broken by point index so that
/// each row is a permutation of 1..n-1. `pair_ranks` holds average ranks of the
/// upper-triangle distances (row-major i < j order).
class RankMatrix {
 public:
  explicit RankMatrix(const DistanceMatrix& d) : n_(d.size()), ranks_(n_ * n_, 0) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n_; ++i) {
      order.clear();
      for (std::size_t j = 0; j < n_; ++j) {
        if (j != i) order.push_back(j);
      }
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = d(i, a), db = d(i, b);
        return da < db || (da == db && a < b);
      });
      for (std::size_t pos = 0; pos < order.size(); ++pos) {
        ranks_[i * n_ + order[pos]] = pos + 1;
      }
    }
    pair_ranks_ = average_ranks(d.pairs());
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t neighbor_rank(std::size_t i, std::size_t j) const { return ranks_[i * n_ + j]; }
  const std::vector<double>& pair_ranks() const noexcept { return pair_ranks_; }

  /// 1-based average ranks; tied values share the mean of their positions.
  static std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = start + 1;
      while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
      const double avg = 0.5 * static_cast<double>(start + 1 + end);
      for (std::size_t p = start; p < end; ++p) ranks[order[p]] = avg;
      start = end;
    }
    return ranks;
  }

  static bool has_ties(const std::vector<double>& values) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> ranks_;
  std::vector<double> pair_ranks_;
};

}  // namespace vistune
