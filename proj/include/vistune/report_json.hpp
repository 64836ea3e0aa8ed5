#pragma once

#include <string>

#include "json.hpp"

#include "vistune/metrics.hpp"

namespace vistune {

using json = nlohmann::ordered_json;

/// The "metrics" block of the agent prompt: grouped, scores as 4-decimal strings.
inline json metrics_block(const MetricsReport& r) {
  json out = json::object();
  out["Global Structure & HD<->2D Correlation"] = {
      {"Spearman Correlation", format_score(r.spearman)},
      {"Stress-1", format_score(r.stress)},
      {"Mean Distance Ratio", format_score(r.mean_distance_ratio)},
  };
  json neighborhood = json::object();
  neighborhood["Trustworthiness (k=" + std::to_string(r.trustworthiness.k) + ")"] =
      format_score(r.trustworthiness.value);
  neighborhood["Continuity (k=" + std::to_string(r.continuity.k) + ")"] =
      format_score(r.continuity.value);
  for (const auto& [name, score] : r.follow_up) {
    neighborhood[name + " (k=" + std::to_string(score.k) + ")"] = format_score(score.value);
  }
  out["Neighborhood Preservation"] = neighborhood;

  json clustering = json::object();
  clustering["Silhouette Score"] =
      r.silhouette ? json(format_score(*r.silhouette)) : json("n/a (fewer than 2 labels)");
  clustering["Number of Labels"] = r.centroids_2d.size();
  out["Clustering & Label Agreement"] = clustering;

  json outliers = json::object();
  outliers["LOF Median"] = format_score(r.lof.median);
  outliers["LOF Outliers (score > " + format_score(r.lof.threshold) + ")"] = r.lof.outlier_count;
  outliers["LOF Neighbors (k)"] = r.lof.k;
  out["Outlier Detection"] = outliers;

  json centroids = json::object();
  for (const auto& [name, xy] : r.centroids_2d) {
    centroids[name] = json::array({format_score(xy[0]), format_score(xy[1])});
  }
  out["Cluster Centroids (2D)"] = centroids;

  if (r.sample.subsampled()) {
    out["Evaluation Sample"] = {
        {"Points Used", r.sample.used},
        {"Total Points", r.sample.total},
        {"Seed", r.sample.seed},
    };
  }
  return out;
}

/// Lossless archival form of a report.
inline json to_json(const MetricsReport& r) {
  json labels = json::array();
  for (const auto& [name, count] : r.label_summary) labels.push_back({{"label", name}, {"count", count}});
  json centroids = json::array();
  for (const auto& [name, xy] : r.centroids_2d) {
    centroids.push_back({{"label", name}, {"x", xy[0]}, {"y", xy[1]}});
  }
  json follow_up = json::array();
  for (const auto& [name, score] : r.follow_up) {
    follow_up.push_back({{"metric", name}, {"value", score.value}, {"k", score.k}});
  }
  return {
      {"spearman", r.spearman},
      {"stress", r.stress},
      {"mean_distance_ratio", r.mean_distance_ratio},
      {"trustworthiness", {{"value", r.trustworthiness.value}, {"k", r.trustworthiness.k}}},
      {"continuity", {{"value", r.continuity.value}, {"k", r.continuity.k}}},
      {"silhouette", r.silhouette ? json(*r.silhouette) : json(nullptr)},
      {"lof",
       {{"median", r.lof.median},
        {"outlier_count", r.lof.outlier_count},
        {"threshold", r.lof.threshold},
        {"k", r.lof.k}}},
      {"label_summary", labels},
      {"centroids_2d", centroids},
      {"sample", {{"total", r.sample.total}, {"used", r.sample.used}, {"seed", r.sample.seed}}},
      {"follow_up", follow_up},
  };
}

inline MetricsReport metrics_from_json(const json& j) {
  MetricsReport r;
  r.spearman = j.at("spearman").get<double>();
  r.stress = j.at("stress").get<double>();
  r.mean_distance_ratio = j.at("mean_distance_ratio").get<double>();
  r.trustworthiness = {j.at("trustworthiness").at("value").get<double>(),
                       j.at("trustworthiness").at("k").get<std::size_t>()};
  r.continuity = {j.at("continuity").at("value").get<double>(),
                  j.at("continuity").at("k").get<std::size_t>()};
  if (!j.at("silhouette").is_null()) r.silhouette = j.at("silhouette").get<double>();
  const auto& lof = j.at("lof");
  r.lof = {lof.at("median").get<double>(), lof.at("outlier_count").get<std::size_t>(),
           lof.at("threshold").get<double>(), lof.at("k").get<std::size_t>()};
  for (const auto& e : j.at("label_summary")) {
    r.label_summary.emplace_back(e.at("label").get<std::string>(), e.at("count").get<std::size_t>());
  }
  for (const auto& e : j.at("centroids_2d")) {
    r.centroids_2d.push_back(
        {e.at("label").get<std::string>(), {e.at("x").get<double>(), e.at("y").get<double>()}});
  }
  const auto& s = j.at("sample");
  r.sample = {s.at("total").get<std::size_t>(), s.at("used").get<std::size_t>(),
              s.at("seed").get<std::uint64_t>()};
  if (j.contains("follow_up")) {
    for (const auto& e : j.at("follow_up")) {
      r.follow_up.push_back({e.at("metric").get<std::string>(),
                             {e.at("value").get<double>(), e.at("k").get<std::size_t>()}});
    }
  }
  return r;
}

}  // namespace vistune
