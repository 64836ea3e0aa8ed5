#pragma once

// Reference documents reproduced exactly, including the "..." elisions.

namespace reference {

inline constexpr const char* kDiagnosticListing = R"({
  "quality_score": 6.0,
  "score_rationale": "Excellent local neighbor preservation but poor global structure...",
  "overall_assessment": {
    "key_strengths": ["High local fidelity"],
    "key_weaknesses": ["Global structure distortion"],
    "metric_analysis": { ... }
  },
  "dendrogram_comparison": {
    "agreement_level": "moderate",
    "key_differences": ["MNP relocated toward endothelial block..."]
  },
  "visual_inspection": {
    "artifacts": ["Large amorphous Proximal Tubule island"]
  },
  "recommendations": [
    {
      "parameter": "tsne.perplexity",
      "current_value": "30.0",
      "suggested_value": "80",
      "rationale": "Larger perplexity increases the effective neighborhood size...",
      "expected_impact": "Reduce Stress-1; more coherent macro-branches.",
      "priority": "high"
    },
    ...
  ],
  "follow_up_metrics": [ ... ]
})";

// Top-level keys of the input prompt schema, in order.
inline constexpr const char* kPromptKeys[] = {"metrics", "label_summary", "hierarchy_hd", "hierarchy_2d",
                                              "parameters"};

}  // namespace reference
