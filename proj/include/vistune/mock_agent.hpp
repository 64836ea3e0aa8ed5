#pragma once

// Deterministic offline agent: scores with the explicit composite and runs a
// one-parameter-at-a-time multiplicative coordinate search.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vistune/agent.hpp"
#include "vistune/composite.hpp"
#include "vistune/diagnostic.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/prompt.hpp"

namespace vistune {

/// One past decision of the mock policy.
struct MockStep {
  double composite = 0.0;   // score observed when the decision was made
  std::string parameter;    // empty when nothing was recommended
  int direction = +1;       // +1 multiply, -1 divide
  bool reversed = false;    // direction already flipped once for this parameter
  std::size_t parameter_index = 0;
};

struct MockPolicy {
  double step_factor = 1.5;
  double epsilon = 0.005;  // stationarity threshold on the composite scale
  std::size_t patience = 2;
  std::vector<std::string> parameters;  // empty: method defaults
};

inline std::vector<std::string> default_mock_parameters(const DRConfig& config) {
  if (config.method == "tsne") return {"perplexity", "learning_rate"};
  if (config.is_external()) return {"n_neighbors", "min_dist"};
  return {};
}

struct MockDecision {
  DiagnosticReport report;
  MockStep step;
};

namespace detail {

inline std::optional<ParamValue> mock_move(const DRConfig& config, const std::string& name,
                                           int direction, double factor) {
  if (!config.has(name)) return std::nullopt;
  const auto& spec = parameter_catalog().at(name);
  if (spec.kind == ParamKind::Choice) return std::nullopt;
  const double current = config.number(name);
  double next = direction > 0 ? current * factor : current / factor;
  if (auto b = config.bounds.find(name); b != config.bounds.end()) {
    next = std::clamp(next, b->second.min, b->second.max);
  }
  if (spec.kind == ParamKind::Integer) {
    const auto rounded = static_cast<std::int64_t>(std::llround(next));
    if (rounded == config.integer(name)) return std::nullopt;
    return rounded;
  }
  if (next == current) return std::nullopt;
  return next;
}

}  // namespace detail

inline MockDecision mock_agent_step(const MasterPrompt& prompt, const MetricsReport& report,
                                    const DRConfig& config, const WeightVector& weights,
                                    const std::vector<MockStep>& history,
                                    const MockPolicy& policy = {}) {
  const double composite = explicit_composite_score(report, weights);
  const auto params = policy.parameters.empty() ? default_mock_parameters(config) : policy.parameters;

  MockDecision out;
  out.step.composite = composite;
  DiagnosticReport& r = out.report;
  r.quality_score = std::clamp(10.0 * composite, 0.0, 10.0);

  const NormalizedMetrics nm = normalize_metrics(report);
  std::vector<std::pair<std::string, double>> terms = {
      {"Trustworthiness", nm.trustworthiness},
      {"Spearman Correlation", nm.spearman},
      {"Stress-1", nm.stress},
      {"LOF Median", nm.lof_median}};
  if (nm.silhouette) terms.insert(terms.begin() + 1, {"Silhouette Score", *nm.silhouette});
  const auto [lo, hi] = std::minmax_element(terms.begin(), terms.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
  r.score_rationale = "Weighted composite " + format_score(composite) + " of normalized metrics; " +
                      "strongest " + hi->first + ", weakest " + lo->first + ".";
  r.overall_assessment.key_strengths = {hi->first + " (normalized " + format_score(hi->second) + ")"};
  r.overall_assessment.key_weaknesses = {lo->first + " (normalized " + format_score(lo->second) + ")"};
  for (const auto& [name, value] : terms) r.overall_assessment.metric_analysis[name] = format_score(value);
  r.dendrogram_comparison.agreement_level =
      prompt.hierarchy_hd.newick == prompt.hierarchy_2d.newick ? "high" : "moderate";
  if (prompt.hierarchy_hd.newick == prompt.hierarchy_2d.newick) {
    r.dendrogram_comparison.key_similarities = {"identical topology"};
  } else {
    r.dendrogram_comparison.key_differences = {"topologies differ"};
  }
  r.visual_inspection.cluster_separation =
      report.silhouette ? "silhouette " + format_score(*report.silhouette) : "no labels";
  r.visual_inspection.cluster_compactness = "LOF median " + format_score(report.lof.median);

  auto stop = [&](const std::string& why) {
    out.step.parameter.clear();
    r.score_rationale += " No further changes: " + why + ".";
    return out;
  };

  if (history.size() >= policy.patience && policy.patience > 0) {
    bool stationary = true;
    double prev = composite;
    for (std::size_t i = 0; i < policy.patience; ++i) {
      const double older = history[history.size() - 1 - i].composite;
      if (std::abs(prev - older) >= policy.epsilon) stationary = false;
      prev = older;
    }
    if (stationary) return stop("composite score stationary");
  }

  std::size_t idx = 0;
  int dir = +1;
  bool reversed = false;
  if (!history.empty()) {
    const MockStep& last = history.back();
    if (last.parameter.empty()) return stop("search already finished");
    idx = last.parameter_index;
    dir = last.direction;
    reversed = last.reversed;
    if (composite < last.composite) {
      if (!reversed) {
        dir = -dir;
        reversed = true;
      } else {
        ++idx;
        dir = +1;
        reversed = false;
      }
    }
  }

  while (idx < params.size()) {
    if (auto next = detail::mock_move(config, params[idx], dir, policy.step_factor)) {
      Recommendation rec;
      rec.parameter = config.family() + "." + params[idx];
      rec.current_value = to_text(config.params.at(params[idx]));
      rec.suggested_value = to_text(*next);
      rec.rationale = std::string(dir > 0 ? "Increase" : "Decrease") + " " + params[idx] +
                      " by a factor of " + format_score(policy.step_factor) +
                      (reversed ? " after the opposite move lowered the composite score."
                                : " to probe the composite score.");
      rec.expected_impact = "Change in composite score from " + format_score(composite) + ".";
      rec.priority = Priority::High;
      r.recommendations.push_back(std::move(rec));
      out.step.parameter = params[idx];
      out.step.direction = dir;
      out.step.reversed = reversed;
      out.step.parameter_index = idx;
      return out;
    }
    if (!reversed) {
      dir = -dir;
      reversed = true;
    } else {
      ++idx;
      dir = +1;
      reversed = false;
    }
  }
  return stop("every tunable parameter explored");
}

class MockAgent : public Agent {
 public:
  explicit MockAgent(WeightVector weights, MockPolicy policy = {})
      : weights_(weights), policy_(std::move(policy)) {}

  AgentTurn step(const MasterPrompt& prompt, const MetricsReport& report,
                 const DRConfig& config) override {
    MockDecision d = mock_agent_step(prompt, report, config, weights_, history_, policy_);
    history_.push_back(d.step);
    AgentTurn turn;
    turn.raw_responses.push_back(to_json(d.report).dump(2));
    turn.report = std::move(d.report);
    return turn;
  }

  std::string name() const override { return "mock"; }
  const std::vector<MockStep>& history() const noexcept { return history_; }

 private:
  WeightVector weights_;
  MockPolicy policy_;
  std::vector<MockStep> history_;
};

}  // namespace vistune
