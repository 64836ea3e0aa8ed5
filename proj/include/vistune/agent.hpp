#pragma once

#include <string>
#include <vector>

#include "vistune/diagnostic.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/metrics.hpp"
#include "vistune/prompt.hpp"

namespace vistune {

/// What one agent call produced: the validated report plus every raw response
/// text received (one per attempt) for archiving.
struct AgentTurn {
  DiagnosticReport report;
  std::vector<std::string> raw_responses;
};

/// A diagnostician that turns a master prompt into recommendations.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentTurn step(const MasterPrompt& prompt, const MetricsReport& report,
                         const DRConfig& config) = 0;
  virtual std::string name() const = 0;
};

}  // namespace vistune
