#pragma once

// External embedding backends. A backend is an executable that reads one JSON
// request on stdin and writes one JSON response on stdout:
//
//   request  {"method", "params", "seed", "data": {"rows", "cols", "values" | "path"}}
//   response {"coordinates": [[x, y], ...]}  or  {"error": "..."}
//
// A nonzero exit status signals failure. Data larger than the inline limit is
// passed as a CSV file path instead of inline values.

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "vistune/core.hpp"
#include "vistune/csv.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/process.hpp"

namespace vistune {

class BackendError : public Error {
 public:
  BackendError(const std::string& what, std::string stderr_text = {})
      : Error(what), stderr_(std::move(stderr_text)) {}
  const std::string& backend_stderr() const noexcept { return stderr_; }

 private:
  std::string stderr_;
};

/// Maps backend names (the part after "external:") to command lines.
class BackendRegistry {
 public:
  void add(const std::string& name, std::vector<std::string> command) {
    if (command.empty()) throw InputError("backend '" + name + "' needs a command");
    commands_[name] = std::move(command);
  }
  bool contains(const std::string& name) const { return commands_.count(name) != 0; }
  const std::vector<std::string>& command(const std::string& name) const {
    const auto it = commands_.find(name);
    if (it == commands_.end()) {
      throw InputError("no backend registered for external:" + name + " (registered: " +
                       names_joined() + ")");
    }
    return it->second;
  }
  std::string names_joined() const {
    std::string out;
    for (const auto& [name, cmd] : commands_) out += (out.empty() ? "" : ", ") + name;
    return out.empty() ? "none" : out;
  }

 private:
  std::map<std::string, std::vector<std::string>> commands_;
};

struct BackendOptions {
  std::chrono::milliseconds timeout{600'000};
  std::size_t inline_value_limit = 1'000'000;
  std::filesystem::path temp_dir = std::filesystem::temp_directory_path();
};

struct BackendOutput {
  DataMatrix coordinates;
  std::string stderr_text;
};

inline nlohmann::json backend_request(const DataMatrix& matrix, const DRConfig& config,
                                      const std::string& data_path = {}) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, value] : config.params) {
    std::visit([&](const auto& x) { params[name] = x; }, value);
  }
  nlohmann::json data = {{"rows", matrix.rows()}, {"cols", matrix.cols()}};
  if (data_path.empty()) {
    data["values"] = matrix.values();
  } else {
    data["path"] = data_path;
  }
  return {{"method", config.family()},
          {"params", params},
          {"seed", config.integer_or("seed", 0)},
          {"data", data}};
}

/// Checks a backend's stdout and returns the n x 2 coordinates.
inline DataMatrix parse_backend_response(const std::string& text, std::size_t expected_rows,
                                         const std::string& stderr_text = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("backend produced malformed output: ") + e.what(), stderr_text);
  }
  if (doc.contains("error")) {
    throw BackendError("backend reported an error: " + doc["error"].dump(), stderr_text);
  }
  if (!doc.contains("coordinates") || !doc["coordinates"].is_array()) {
    throw BackendError("backend response lacks a 'coordinates' array", stderr_text);
  }
  const auto& rows = doc["coordinates"];
  if (rows.size() != expected_rows) {
    throw BackendError("backend returned " + std::to_string(rows.size()) + " rows, expected " +
                           std::to_string(expected_rows),
                       stderr_text);
  }
  DataMatrix out(expected_rows, 2);
  for (std::size_t i = 0; i < expected_rows; ++i) {
    const auto& r = rows[i];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw BackendError("backend row " + std::to_string(i) + " is not a pair of numbers",
                         stderr_text);
    }
    out(i, 0) = r[0].get<double>();
    out(i, 1) = r[1].get<double>();
    if (!std::isfinite(out(i, 0)) || !std::isfinite(out(i, 1))) {
      throw BackendError("backend row " + std::to_string(i) + " is not finite", stderr_text);
    }
  }
  return out;
}

/// Spawns the registered backend for `config.method` and validates its result.
inline BackendOutput run_external_backend(const DataMatrix& matrix, const DRConfig& config,
                                          const BackendRegistry& registry,
                                          const BackendOptions& options = {}) {
  if (!config.is_external()) throw InputError("run_external_backend: method is not external");
  const auto& command = registry.command(config.family());

  std::filesystem::path temp;
  struct TempGuard {
    std::filesystem::path& p;
    ~TempGuard() {
      std::error_code ec;
      if (!p.empty()) std::filesystem::remove(p, ec);
    }
  } guard{temp};
  if (matrix.values().size() > options.inline_value_limit) {
    static std::atomic<unsigned> counter{0};
    temp = options.temp_dir / ("vistune_" + std::to_string(::getpid()) + "_" +
                               std::to_string(counter++) + ".csv");
    write_dataset(temp, matrix);
  }
  const std::string request = backend_request(matrix, config, temp.string()).dump();
  const ProcessResult proc = run_process(command, request, options.timeout);
  if (proc.timed_out) {
    throw BackendError("backend timed out after " + std::to_string(options.timeout.count()) + " ms",
                       proc.err);
  }
  if (proc.exit_code != 0) {
    std::string detail;
    try {
      const auto doc = nlohmann::json::parse(proc.out);
      if (doc.contains("error")) detail = ": " + doc["error"].dump();
    } catch (const nlohmann::json::exception&) {
    }
    throw BackendError("backend exited with status " + std::to_string(proc.exit_code) + detail,
                       proc.err);
  }
  return {parse_backend_response(proc.out, matrix.rows(), proc.err), proc.err};
}

}  // namespace vistune
