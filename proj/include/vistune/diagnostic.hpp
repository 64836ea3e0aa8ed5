#pragma once

// The agent's structured response: quality score, assessments and a
// prioritized list of hyperparameter recommendations.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vistune/core.hpp"
#include "vistune/dr_config.hpp"

namespace vistune {

/// Malformed or schema-violating agent output.
class DiagnosticParseError : public Error {
 public:
  using Error::Error;
};

enum class Priority { High, Medium, Low };

inline std::string to_string(Priority p) {
  switch (p) {
    case Priority::High: return "high";
    case Priority::Medium: return "medium";
    case Priority::Low: return "low";
  }
  return "low";
}

struct Recommendation {
  std::string parameter;  // dotted, e.g. "tsne.perplexity"
  std::string current_value;
  std::string suggested_value;
  std::string rationale;
  std::string expected_impact;
  Priority priority = Priority::Medium;
  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

struct OverallAssessment {
  std::vector<std::string> key_strengths;
  std::vector<std::string> key_weaknesses;
  nlohmann::ordered_json metric_analysis = nlohmann::ordered_json::object();
  friend bool operator==(const OverallAssessment&, const OverallAssessment&) = default;
};

struct DendrogramComparison {
  std::string agreement_level = "moderate";  // low | moderate | high
  std::vector<std::string> key_similarities;
  std::vector<std::string> key_differences;
  friend bool operator==(const DendrogramComparison&, const DendrogramComparison&) = default;
};

struct VisualInspection {
  std::string cluster_separation;
  std::string cluster_compactness;
  std::vector<std::string> notable_patterns;
  std::vector<std::string> artifacts;
  friend bool operator==(const VisualInspection&, const VisualInspection&) = default;
};

struct DiagnosticReport {
  double quality_score = 0.0;  // [0, 10]
  std::string score_rationale;
  OverallAssessment overall_assessment;
  DendrogramComparison dendrogram_comparison;
  VisualInspection visual_inspection;
  std::vector<Recommendation> recommendations;  // empty signals no further changes
  std::vector<std::string> follow_up_metrics;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  // unknown top-level fields
  std::vector<std::string> warnings;  // produced while parsing; not serialized

  bool operator==(const DiagnosticReport& o) const {
    return quality_score == o.quality_score && score_rationale == o.score_rationale &&
           overall_assessment == o.overall_assessment &&
           dendrogram_comparison == o.dendrogram_comparison &&
           visual_inspection == o.visual_inspection && recommendations == o.recommendations &&
           follow_up_metrics == o.follow_up_metrics && extra == o.extra;
  }
};

namespace detail {

using ojson = nlohmann::ordered_json;

// Removes "..." placeholders that sit outside string literals (as in schema
// examples) together with the commas they leave dangling, and strips Markdown
// code fences.
inline std::string strip_placeholders(std::string_view raw) {
  std::string_view text = raw;
  if (const auto fence = text.find("```"); fence != std::string_view::npos) {
    const auto body_start = text.find('\n', fence);
    const auto close = text.rfind("```");
    if (body_start != std::string_view::npos && close > body_start) {
      text = text.substr(body_start + 1, close - body_start - 1);
    }
  }
  std::string cleaned;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      cleaned += c;
      if (c == '\\' && i + 1 < text.size()) {
        cleaned += text[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (text.compare(i, 3, "...") == 0) {
      i += 2;
      continue;
    }
    cleaned += c;
  }
  // Second pass: drop commas that now precede a closer or follow an opener.
  std::string out;
  in_string = false;
  for (std::size_t i = 0; i < cleaned.size(); ++i) {
    const char c = cleaned[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < cleaned.size()) {
        out += cleaned[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[j]))) ++j;
      if (j < cleaned.size() && (cleaned[j] == '}' || cleaned[j] == ']' || cleaned[j] == ',')) continue;
      std::size_t k = out.size();
      while (k > 0 && std::isspace(static_cast<unsigned char>(out[k - 1]))) --k;
      if (k > 0 && (out[k - 1] == '{' || out[k - 1] == '[')) continue;
    }
    out += c;
  }
  return out;
}

inline std::string as_text(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

inline std::vector<std::string> text_list(const ojson& obj, const char* key) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const auto& v = obj.at(key);
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(as_text(e));
  } else if (!v.is_null()) {
    out.push_back(as_text(v));
  }
  return out;
}

inline std::string text_field(const ojson& obj, const char* key) {
  return obj.contains(key) ? as_text(obj.at(key)) : std::string{};
}

inline ojson object_field(const ojson& obj, const char* key) {
  if (!obj.contains(key)) return ojson::object();
  if (!obj.at(key).is_object()) {
    throw DiagnosticParseError(std::string("field '") + key + "' must be an object");
  }
  return obj.at(key);
}

}  // namespace detail

/// Strict parse of an agent response. Recommendations for parameters known to
/// `config` are type-checked and clamped into its bounds (each clamp is recorded
/// in `warnings`); recommendations whose value does not parse are dropped with a
/// warning. Names the config does not know are kept for apply_recommendations
/// to skip.
inline DiagnosticReport parse_diagnostic(std::string_view raw, const DRConfig* config = nullptr) {
  using detail::ojson;
  ojson doc;
  try {
    doc = ojson::parse(detail::strip_placeholders(raw));
  } catch (const nlohmann::json::exception& e) {
    throw DiagnosticParseError(std::string("response is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DiagnosticParseError("response must be a JSON object");
  if (!doc.contains("quality_score")) throw DiagnosticParseError("missing required field 'quality_score'");
  if (!doc.contains("recommendations")) {
    throw DiagnosticParseError("missing required field 'recommendations'");
  }
  DiagnosticReport r;
  const auto& qs = doc.at("quality_score");
  if (qs.is_number()) {
    r.quality_score = qs.get<double>();
  } else if (qs.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = qs.get<std::string>();
      r.quality_score = std::stod(s, &used);
      if (used != s.size()) throw DiagnosticParseError("quality_score is not a number");
    } catch (const std::logic_error&) {
      throw DiagnosticParseError("quality_score is not a number");
    }
  } else {
    throw DiagnosticParseError("quality_score is not a number");
  }
  if (!std::isfinite(r.quality_score) || r.quality_score < 0.0 || r.quality_score > 10.0) {
    throw DiagnosticParseError("quality_score " + format_exact(r.quality_score) +
                               " outside [0, 10]");
  }
  r.score_rationale = detail::text_field(doc, "score_rationale");

  const ojson oa = detail::object_field(doc, "overall_assessment");
  r.overall_assessment.key_strengths = detail::text_list(oa, "key_strengths");
  r.overall_assessment.key_weaknesses = detail::text_list(oa, "key_weaknesses");
  if (oa.contains("metric_analysis")) r.overall_assessment.metric_analysis = oa.at("metric_analysis");

  const ojson dc = detail::object_field(doc, "dendrogram_comparison");
  if (dc.contains("agreement_level")) {
    const std::string level = detail::as_text(dc.at("agreement_level"));
    if (level != "low" && level != "moderate" && level != "high") {
      throw DiagnosticParseError("agreement_level must be low, moderate or high (got '" + level + "')");
    }
    r.dendrogram_comparison.agreement_level = level;
  }
  r.dendrogram_comparison.key_similarities = detail::text_list(dc, "key_similarities");
  r.dendrogram_comparison.key_differences = detail::text_list(dc, "key_differences");

  const ojson vi = detail::object_field(doc, "visual_inspection");
  r.visual_inspection.cluster_separation = detail::text_field(vi, "cluster_separation");
  r.visual_inspection.cluster_compactness = detail::text_field(vi, "cluster_compactness");
  r.visual_inspection.notable_patterns = detail::text_list(vi, "notable_patterns");
  r.visual_inspection.artifacts = detail::text_list(vi, "artifacts");

  const auto& recs = doc.at("recommendations");
  if (!recs.is_array()) throw DiagnosticParseError("'recommendations' must be an array");
  for (const auto& item : recs) {
    if (!item.is_object()) throw DiagnosticParseError("each recommendation must be an object");
    if (!item.contains("parameter") || !item.contains("suggested_value")) {
      throw DiagnosticParseError("recommendation needs 'parameter' and 'suggested_value'");
    }
    Recommendation rec;
    rec.parameter = detail::as_text(item.at("parameter"));
    rec.current_value = detail::text_field(item, "current_value");
    rec.suggested_value = detail::as_text(item.at("suggested_value"));
    rec.rationale = detail::text_field(item, "rationale");
    rec.expected_impact = detail::text_field(item, "expected_impact");
    const std::string prio = item.contains("priority") ? detail::as_text(item.at("priority")) : "medium";
    if (prio == "high") {
      rec.priority = Priority::High;
    } else if (prio == "medium") {
      rec.priority = Priority::Medium;
    } else if (prio == "low") {
      rec.priority = Priority::Low;
    } else {
      throw DiagnosticParseError("priority must be high, medium or low (got '" + prio + "')");
    }
    if (config) {
      if (const auto name = config->resolve(rec.parameter)) {
        try {
          const CoercedValue cv = coerce_parameter(*config, *name, rec.suggested_value);
          const std::string fixed = to_text(cv.value);
          if (cv.clamped) {
            r.warnings.push_back(rec.parameter + ": suggested " + rec.suggested_value +
                                 " clamped to bound " + fixed);
            rec.suggested_value = fixed;
          } else if (cv.rounded) {
            r.warnings.push_back(rec.parameter + ": suggested " + rec.suggested_value +
                                 " rounded to " + fixed);
            rec.suggested_value = fixed;
          }
        } catch (const InputError& e) {
          r.warnings.push_back(rec.parameter + ": dropped (" + e.what() + ")");
          continue;
        }
      }
    }
    r.recommendations.push_back(std::move(rec));
  }
  r.follow_up_metrics = detail::text_list(doc, "follow_up_metrics");

  static const char* known[] = {"quality_score",         "score_rationale",
                                "overall_assessment",    "dendrogram_comparison",
                                "visual_inspection",     "recommendations",
                                "follow_up_metrics"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) r.extra[key] = value;
  }
  return r;
}

inline nlohmann::ordered_json to_json(const DiagnosticReport& r) {
  using detail::ojson;
  ojson recs = ojson::array();
  for (const auto& rec : r.recommendations) {
    recs.push_back({{"parameter", rec.parameter},
                    {"current_value", rec.current_value},
                    {"suggested_value", rec.suggested_value},
                    {"rationale", rec.rationale},
                    {"expected_impact", rec.expected_impact},
                    {"priority", to_string(rec.priority)}});
  }
  ojson out = {
      {"quality_score", r.quality_score},
      {"score_rationale", r.score_rationale},
      {"overall_assessment",
       {{"key_strengths", r.overall_assessment.key_strengths},
        {"key_weaknesses", r.overall_assessment.key_weaknesses},
        {"metric_analysis", r.overall_assessment.metric_analysis}}},
      {"dendrogram_comparison",
       {{"agreement_level", r.dendrogram_comparison.agreement_level},
        {"key_similarities", r.dendrogram_comparison.key_similarities},
        {"key_differences", r.dendrogram_comparison.key_differences}}},
      {"visual_inspection",
       {{"cluster_separation", r.visual_inspection.cluster_separation},
        {"cluster_compactness", r.visual_inspection.cluster_compactness},
        {"notable_patterns", r.visual_inspection.notable_patterns},
        {"artifacts", r.visual_inspection.artifacts}}},
      {"recommendations", recs},
      {"follow_up_metrics", r.follow_up_metrics},
  };
  for (const auto& [key, value] : r.extra.items()) out[key] = value;
  return out;
}

struct AppliedConfig {
  DRConfig config;
  std::vector<std::string> applied;
  std::vector<std::string> warnings;
};

/// Applies recommendations in priority order (high, medium, low; list order
/// within a priority). Unknown names and unparseable values are skipped with a
/// warning; values are clamped into bounds. The input config is not modified.
inline AppliedConfig apply_recommendations(const DRConfig& config, const DiagnosticReport& report) {
  AppliedConfig out{config, {}, {}};
  std::vector<const Recommendation*> ordered;
  for (const auto& rec : report.recommendations) ordered.push_back(&rec);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return static_cast<int>(a->priority) < static_cast<int>(b->priority);
  });
  for (const auto* rec : ordered) {
    const auto name = config.resolve(rec->parameter);
    if (!name) {
      out.warnings.push_back("skipped '" + rec->parameter + "': not a parameter of method " +
                             config.method);
      continue;
    }
    try {
      const CoercedValue cv = coerce_parameter(config, *name, rec->suggested_value);
      if (cv.clamped) {
        out.warnings.push_back(*name + ": " + rec->suggested_value + " clamped to " + to_text(cv.value));
      }
      out.config.params[*name] = cv.value;
      out.applied.push_back(*name + "=" + to_text(cv.value));
    } catch (const InputError& e) {
      out.warnings.push_back("skipped '" + rec->parameter + "': " + e.what());
    }
  }
  return out;
}

}  // namespace vistune
