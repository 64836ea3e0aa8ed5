#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vistune/core.hpp"

namespace vistune {

/// Feature matrix plus optional per-row labels, as loaded from CSV.
struct Dataset {
  DataMatrix features;
  Labels labels;  // empty when the file has no label column
  std::vector<std::string> feature_names;
  std::string source;

  bool labeled() const noexcept { return !labels.empty(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Reads a CSV with a header row. The column named `label_column` (if present)
/// becomes the labels; every other column must be numeric.
inline Dataset read_dataset(const std::filesystem::path& path,
                            const std::string& label_column = "label") {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset " + path.string() + " is empty");
  const auto header = detail::split_csv_line(line);
  std::optional<std::size_t> label_idx;
  Dataset ds;
  ds.source = path.string();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_idx = c;
    } else {
      ds.feature_names.push_back(header[c]);
    }
  }
  std::vector<double> values;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (label_idx && c == *label_idx) {
        ds.labels.push_back(fields[c]);
        continue;
      }
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != fields[c].size()) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                         header[c] + "' is not numeric: '" + fields[c] + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  ds.features = DataMatrix(rows, ds.feature_names.size(), std::move(values));
  return ds;
}

/// Writes features (and labels when present) with full double precision.
inline void write_dataset(const std::filesystem::path& path, const DataMatrix& features,
                          const Labels& labels = {},
                          std::vector<std::string> names = {}) {
  if (names.empty()) {
    for (std::size_t c = 0; c < features.cols(); ++c) names.push_back("x" + std::to_string(c));
  }
  std::ostringstream out;
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << detail::csv_field(names[c]);
  if (!labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      out << (c ? "," : "") << format_exact(features(i, c));
    }
    if (!labels.empty()) out << ',' << detail::csv_field(labels[i]);
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path.string());
  file << out.str();
}

}  // namespace vistune
