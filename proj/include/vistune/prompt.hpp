#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "vistune/dr_config.hpp"
#include "vistune/hierarchy.hpp"
#include "vistune/metrics.hpp"
#include "vistune/report_json.hpp"

namespace vistune {

struct HierarchyView {
  std::string newick;
  std::string dimension;  // "20D (PCA)", "2D", ...
};

/// Per-iteration state document handed to the agent.
struct MasterPrompt {
  nlohmann::ordered_json metrics;
  nlohmann::ordered_json label_summary;
  HierarchyView hierarchy_hd;
  HierarchyView hierarchy_2d;
  nlohmann::ordered_json parameters;
  std::size_t iteration = 1;
  std::optional<std::filesystem::path> plot;  // scatter plot for vision-capable agents

  /// Exactly the five top-level keys: metrics, label_summary, hierarchy_hd,
  /// hierarchy_2d, parameters.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    out["metrics"] = metrics;
    out["label_summary"] = label_summary;
    out["hierarchy_hd"] = {{"newick", hierarchy_hd.newick}, {"dimension", hierarchy_hd.dimension}};
    out["hierarchy_2d"] = {{"newick", hierarchy_2d.newick}, {"dimension", hierarchy_2d.dimension}};
    out["parameters"] = parameters;
    return out;
  }

  /// Canonical text form (2-space indent, trailing newline).
  std::string dump() const { return to_json().dump(2) + "\n"; }
};

inline MasterPrompt build_master_prompt(const MetricsReport& report, const Dendrogram& tree_hd,
                                        const std::string& hd_dimension,
                                        const Dendrogram& tree_2d, const DRConfig& config,
                                        std::size_t iteration) {
  MasterPrompt p;
  p.metrics = metrics_block(report);
  p.label_summary = nlohmann::ordered_json::object();
  for (const auto& [label, count] : report.label_summary) p.label_summary[label] = count;
  p.hierarchy_hd = {to_newick(tree_hd), hd_dimension};
  p.hierarchy_2d = {to_newick(tree_2d), "2D"};
  p.parameters = parameters_block(config);
  p.iteration = iteration;
  return p;
}

}  // namespace vistune
