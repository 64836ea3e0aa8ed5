#pragma once

// Remote agent over a chat-completion style HTTP endpoint.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "vistune/agent.hpp"
#include "vistune/diagnostic.hpp"
#include "vistune/prompt.hpp"

namespace vistune {

inline const char* default_system_prompt() {
  return R"(You are an expert diagnostician of 2D visualizations produced by dimensionality reduction.
The user message is a JSON document with the current embedding quality metrics, a label summary,
Newick dendrograms of label centroids in the high-dimensional reference space and in 2D, and the
hyperparameters that produced the embedding. Compare the two dendrograms, inspect the metrics and
any attached plot, then recommend hyperparameter changes for the next iteration.
Reply with a single JSON object and nothing else, using exactly this schema:
{
  "quality_score": <number from 0 to 10>,
  "score_rationale": "<text>",
  "overall_assessment": {"key_strengths": ["<text>"], "key_weaknesses": ["<text>"], "metric_analysis": {"<metric>": "<text>"}},
  "dendrogram_comparison": {"agreement_level": "low|moderate|high", "key_similarities": ["<text>"], "key_differences": ["<text>"]},
  "visual_inspection": {"cluster_separation": "<text>", "cluster_compactness": "<text>", "notable_patterns": ["<text>"], "artifacts": ["<text>"]},
  "recommendations": [{"parameter": "<method>.<name>", "current_value": "<text>", "suggested_value": "<text>", "rationale": "<text>", "expected_impact": "<text>", "priority": "high|medium|low"}],
  "follow_up_metrics": ["<text>"]
}
Parameter names must be among those listed under "parameters". Return an empty recommendations
list when no further change is worthwhile.)";
}

struct LlmEndpoint {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-5.2";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: send no credential
  double temperature = 0.0;
  int max_tokens = 4096;
  std::chrono::seconds timeout{300};
  bool attach_plot = false;
  std::size_t max_attempts = 3;
  std::string system_prompt = default_system_prompt();
};

struct TransportResult {
  bool ok = false;  // false: the request never produced an HTTP response
  int status = 0;
  std::string body;
  std::string error;
};

/// Sends one request body and returns the raw HTTP outcome.
using Transport = std::function<TransportResult(const std::string& request_body)>;

inline Transport http_transport(const LlmEndpoint& endpoint) {
  return [endpoint](const std::string& body) {
    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
      const char* key = std::getenv(endpoint.api_key_env.c_str());
      if (!key || !*key) {
        throw InputError("credential variable " + endpoint.api_key_env + " is not set");
      }
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    httplib::Client client(endpoint.base_url);
    const auto secs = static_cast<time_t>(endpoint.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    TransportResult out;
    if (!client.is_valid()) {
      out.error = "invalid endpoint '" + endpoint.base_url + "'";
      return out;
    }
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (!res) {
      out.error = "transport failure: " + httplib::to_string(res.error());
      return out;
    }
    out.ok = true;
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

struct AgentAttempt {
  std::size_t attempt = 0;
  std::string outcome;  // "ok", "transport", "http", "parse"
  std::string raw;      // response text (message content when it could be extracted)
  std::string error;
};

class AgentError : public Error {
 public:
  AgentError(const std::string& what, std::string last_raw, std::vector<AgentAttempt> attempts)
      : Error(what), last_raw_(std::move(last_raw)), attempts_(std::move(attempts)) {}
  const std::string& last_raw() const noexcept { return last_raw_; }
  const std::vector<AgentAttempt>& attempts() const noexcept { return attempts_; }

 private:
  std::string last_raw_;
  std::vector<AgentAttempt> attempts_;
};

struct LlmStepResult {
  DiagnosticReport report;
  std::vector<AgentAttempt> attempts;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string image_mime(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "image/svg+xml";
}

/// choices[0].message.content, as text.
inline std::string completion_content(const std::string& body) {
  const auto doc = nlohmann::json::parse(body);
  const auto& content = doc.at("choices").at(0).at("message").at("content");
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
    }
    return text;
  }
  throw std::runtime_error("message content is neither text nor a list of parts");
}

}  // namespace detail

inline nlohmann::json llm_request(const LlmEndpoint& endpoint, const MasterPrompt& prompt,
                                  const nlohmann::json& extra_messages) {
  nlohmann::json user;
  user["role"] = "user";
  if (endpoint.attach_plot && prompt.plot) {
    const std::string bytes = detail::read_file(*prompt.plot);
    const std::string url = "data:" + detail::image_mime(*prompt.plot) + ";base64," +
                            httplib::detail::base64_encode(bytes);
    user["content"] = nlohmann::json::array(
        {{{"type", "text"}, {"text", prompt.dump()}},
         {{"type", "image_url"}, {"image_url", {{"url", url}}}}});
  } else {
    user["content"] = prompt.dump();
  }
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", endpoint.system_prompt}});
  messages.push_back(user);
  for (const auto& m : extra_messages) messages.push_back(m);
  return {{"model", endpoint.model},
          {"temperature", endpoint.temperature},
          {"max_tokens", endpoint.max_tokens},
          {"messages", messages}};
}

/// Sends the prompt, retrying on transport failure or unparseable output.
/// Parse errors are fed back to the model in the retry. Throws AgentError
/// once attempts are exhausted.
inline LlmStepResult llm_agent_step(const MasterPrompt& prompt, const DRConfig& config,
                                    const LlmEndpoint& endpoint, const Transport& transport) {
  LlmStepResult result;
  nlohmann::json repair = nlohmann::json::array();
  std::string last_raw;
  const std::size_t attempts = std::max<std::size_t>(1, endpoint.max_attempts);
  for (std::size_t a = 1; a <= attempts; ++a) {
    AgentAttempt rec;
    rec.attempt = a;
    const TransportResult tr = transport(llm_request(endpoint, prompt, repair).dump());
    if (!tr.ok) {
      rec.outcome = "transport";
      rec.error = tr.error;
      result.attempts.push_back(rec);
      continue;
    }
    last_raw = tr.body;
    rec.raw = tr.body;
    if (tr.status < 200 || tr.status >= 300) {
      rec.outcome = "http";
      rec.error = "HTTP " + std::to_string(tr.status);
      result.attempts.push_back(rec);
      continue;
    }
    std::string content;
    try {
      content = detail::completion_content(tr.body);
      rec.raw = content;
      last_raw = content;
      DiagnosticReport report = parse_diagnostic(content, &config);
      rec.outcome = "ok";
      result.attempts.push_back(rec);
      result.report = std::move(report);
      return result;
    } catch (const std::exception& e) {
      rec.outcome = "parse";
      rec.error = e.what();
      result.attempts.push_back(rec);
      repair.push_back({{"role", "assistant"}, {"content", content.empty() ? tr.body : content}});
      repair.push_back({{"role", "user"},
                        {"content", std::string("Your previous reply could not be used: ") + e.what() +
                                        ". Reply again with only the JSON object in the required schema."}});
    }
  }
  const std::string why = result.attempts.empty() ? "no attempts" : result.attempts.back().error;
  throw AgentError("agent failed after " + std::to_string(result.attempts.size()) +
                       " attempts: " + why,
                   last_raw, result.attempts);
}

class LlmAgent : public Agent {
 public:
  explicit LlmAgent(LlmEndpoint endpoint, Transport transport = {})
      : endpoint_(std::move(endpoint)),
        transport_(transport ? std::move(transport) : http_transport(endpoint_)) {}

  AgentTurn step(const MasterPrompt& prompt, const MetricsReport&, const DRConfig& config) override {
    LlmStepResult r = llm_agent_step(prompt, config, endpoint_, transport_);
    AgentTurn turn;
    for (const auto& a : r.attempts) {
      if (!a.raw.empty()) turn.raw_responses.push_back(a.raw);
    }
    turn.report = std::move(r.report);
    last_attempts_ = std::move(r.attempts);
    return turn;
  }

  std::string name() const override { return "llm:" + endpoint_.model; }
  const std::vector<AgentAttempt>& last_attempts() const noexcept { return last_attempts_; }

 private:
  LlmEndpoint endpoint_;
  Transport transport_;
  std::vector<AgentAttempt> last_attempts_;
};

}  // namespace vistune
