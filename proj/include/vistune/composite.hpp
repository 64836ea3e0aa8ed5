#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "vistune/core.hpp"
#include "vistune/metrics.hpp"

namespace vistune {

/// Metric names accepted in weight vectors, in canonical order.
inline const std::array<std::string, 5>& weighted_metric_names() {
  static const std::array<std::string, 5> names = {
      "Trustworthiness", "Silhouette Score", "Spearman Correlation", "Stress-1", "LOF Median"};
  return names;
}

/// Non-negative weights over the five scored metrics, summing to 1.
class WeightVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates names, ranges and the unit sum.
  static WeightVector from_map(const std::map<std::string, double>& weights) {
    WeightVector w;
    for (const auto& [name, value] : weights) {
      const std::size_t idx = index_of(name);
      if (!(value >= 0.0 && value <= 1.0)) {
        throw InputError("weight for '" + name + "' must be in [0, 1]");
      }
      w.values_[idx] = value;
    }
    double sum = 0.0;
    for (double v : w.values_) sum += v;
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InputError("weights must sum to 1 (got " + format_exact(sum) + ")");
    }
    return w;
  }

  /// Divides positive raw weights by their sum.
  static WeightVector normalized(const std::map<std::string, double>& raw) {
    double sum = 0.0;
    for (const auto& [name, value] : raw) {
      index_of(name);
      if (!(value >= 0.0) || !std::isfinite(value)) throw InputError("weights must be non-negative");
      sum += value;
    }
    if (!(sum > 0.0)) throw InputError("weights must not all be zero");
    std::map<std::string, double> scaled;
    for (const auto& [name, value] : raw) scaled[name] = value / sum;
    WeightVector w;
    for (const auto& [name, value] : scaled) w.values_[index_of(name)] = value;
    return w;
  }

  static WeightVector preset(const std::string& name) {
    static const std::map<std::string, std::map<std::string, double>> presets = {
        {"gpt-5.2",
         {{"Trustworthiness", 0.30},
          {"Silhouette Score", 0.30},
          {"Spearman Correlation", 0.20},
          {"Stress-1", 0.15},
          {"LOF Median", 0.05}}},
        {"claude-opus-4-5",
         {{"Trustworthiness", 0.20},
          {"Silhouette Score", 0.35},
          {"Spearman Correlation", 0.15},
          {"Stress-1", 0.10},
          {"LOF Median", 0.20}}},
        {"gemini-3-pro-preview",
         {{"Trustworthiness", 0.25},
          {"Silhouette Score", 0.25},
          {"Spearman Correlation", 0.20},
          {"Stress-1", 0.15},
          {"LOF Median", 0.15}}},
    };
    const auto it = presets.find(name);
    if (it == presets.end()) {
      throw InputError("unknown weight preset '" + name +
                       "' (expected gpt-5.2, claude-opus-4-5 or gemini-3-pro-preview)");
    }
    return from_map(it->second);
  }

  static std::vector<std::string> preset_names() {
    return {"gpt-5.2", "claude-opus-4-5", "gemini-3-pro-preview"};
  }

  /// A preset name, or a path to a JSON object of metric name -> weight.
  static WeightVector load(const std::string& preset_or_path) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
      return preset(preset_or_path);
    }
    std::ifstream in(preset_or_path);
    if (!in) {
      throw InputError("'" + preset_or_path + "' is neither a weight preset nor a readable file");
    }
    const auto doc = nlohmann::json::parse(in);
    std::map<std::string, double> m;
    for (const auto& [k, v] : doc.items()) m[k] = v.get<double>();
    return from_map(m);
  }

  double operator[](std::size_t i) const { return values_[i]; }
  double weight(const std::string& name) const { return values_[index_of(name)]; }
  const std::array<double, 5>& values() const noexcept { return values_; }

  double sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < values_.size(); ++i) out[weighted_metric_names()[i]] = values_[i];
    return out;
  }

 private:
  static std::size_t index_of(const std::string& name) {
    const auto& names = weighted_metric_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw InputError("unknown metric name '" + name + "' in weights");
  }

  std::array<double, 5> values_{};
};

/// Each metric mapped to [0, 1], higher is better, in weighted_metric_names()
/// order. Silhouette is absent when the report has none.
struct NormalizedMetrics {
  double trustworthiness;
  std::optional<double> silhouette;
  double spearman;
  double stress;
  double lof_median;
};

inline NormalizedMetrics normalize_metrics(const MetricsReport& r) {
  NormalizedMetrics m;
  m.trustworthiness = std::clamp(r.trustworthiness.value, 0.0, 1.0);
  if (r.silhouette) m.silhouette = std::clamp((*r.silhouette + 1.0) / 2.0, 0.0, 1.0);
  m.spearman = std::clamp((r.spearman + 1.0) / 2.0, 0.0, 1.0);
  m.stress = 1.0 - std::min(r.stress, 1.0);
  m.lof_median = 1.0 - std::min(std::abs(r.lof.median - 1.0), 1.0);
  return m;
}

/// Weighted sum of normalized metrics in [0, 1]. When silhouette is absent its
/// weight is spread over the other metrics in proportion to their weights and
/// a note is appended to `notes`.
inline double explicit_composite_score(const MetricsReport& report, const WeightVector& w,
                                       std::vector<std::string>* notes = nullptr) {
  const NormalizedMetrics m = normalize_metrics(report);
  const std::array<double, 5> terms = {m.trustworthiness, m.silhouette.value_or(0.0), m.spearman,
                                       m.stress, m.lof_median};
  std::array<double, 5> weights = w.values();
  if (!m.silhouette) {
    const double rest = 1.0 - weights[1];
    if (rest > 0.0) {
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (i != 1) weights[i] /= rest;
      }
    }
    weights[1] = 0.0;
    if (notes) {
      notes->push_back("silhouette absent: its weight " + format_score(w[1]) +
                       " was redistributed over the remaining metrics");
    }
  }
  double score = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) score += weights[i] * terms[i];
  return std::clamp(score, 0.0, 1.0);
}

}  // namespace vistune
