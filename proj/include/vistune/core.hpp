#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vistune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or input-validation failure.
class InputError : public Error {
 public:
  using Error::Error;
};

using Labels = std::vector<std::string>;

/// Dense row-major matrix of doubles. Rows are observations.
class DataMatrix {
 public:
  DataMatrix() = default;

  DataMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw InputError("DataMatrix: expected " + std::to_string(rows_ * cols_) +
                       " values, got " + std::to_string(values_.size()));
    }
  }

  static DataMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) {
        throw InputError("DataMatrix: row " + std::to_string(i) + " has " +
                         std::to_string(rows[i].size()) + " columns, expected " +
                         std::to_string(cols));
      }
      values.insert(values.end(), rows[i].begin(), rows[i].end());
    }
    return DataMatrix(rows.size(), cols, std::move(values));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  const std::vector<double>& values() const noexcept { return values_; }

  /// Index of the first row holding a NaN or infinity.
  std::optional<std::size_t> first_nonfinite_row() const {
    for (std::size_t i = 0; i < rows_; ++i) {
      for (double v : row(i)) {
        if (!std::isfinite(v)) return i;
      }
    }
    return std::nullopt;
  }

  DataMatrix select_rows(std::span<const std::size_t> indices) const {
    DataMatrix out(indices.size(), cols_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      auto src = row(indices[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  DataMatrix first_columns(std::size_t count) const {
    if (count > cols_) throw InputError("DataMatrix: not enough columns");
    DataMatrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, j);
    }
    return out;
  }

  friend bool operator==(const DataMatrix&, const DataMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Renders a score the way the agent prompt shows it: fixed, four decimals.
inline std::string format_score(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

/// Text that parses back to the same double.
inline std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace vistune
