#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "vistune/core.hpp"

namespace vistune {

enum class ParamKind { Integer, Real, Choice };

struct ParamSpec {
  ParamKind kind;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> choices;
};

struct Bound {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const Bound&, const Bound&) = default;
};

using ParamValue = std::variant<std::int64_t, double, std::string>;

/// Known hyperparameters and their default validity ranges.
inline const std::map<std::string, ParamSpec>& parameter_catalog() {
  static const std::map<std::string, ParamSpec> catalog = {
      {"perplexity", {ParamKind::Real, 5.0, 100.0, {}}},
      {"learning_rate", {ParamKind::Real, 10.0, 1000.0, {}}},
      {"n_iter", {ParamKind::Integer, 250.0, 5000.0, {}}},
      {"n_pcs", {ParamKind::Integer, 2.0, 100.0, {}}},
      {"n_neighbors", {ParamKind::Integer, 2.0, 200.0, {}}},
      {"min_dist", {ParamKind::Real, 0.0, 0.99, {}}},
      {"MN_ratio", {ParamKind::Real, 0.1, 10.0, {}}},
      {"FP_ratio", {ParamKind::Real, 0.1, 10.0, {}}},
      {"seed", {ParamKind::Integer, 0.0, 2147483647.0, {}}},
      {"solver", {ParamKind::Choice, 0.0, 0.0, {"full", "randomized"}}},
  };
  return catalog;
}

/// Method identifier plus hyperparameter values and their bounds.
class DRConfig {
 public:
  std::string method;
  std::map<std::string, ParamValue> params;
  std::map<std::string, Bound> bounds;

  /// Baseline t-SNE: perplexity 30, learning rate 200, 1000 iterations, 20 PCs.
  static DRConfig tsne_baseline() {
    DRConfig c;
    c.method = "tsne";
    c.params = {{"perplexity", 30.0},
                {"learning_rate", 200.0},
                {"n_iter", std::int64_t{1000}},
                {"n_pcs", std::int64_t{20}},
                {"seed", std::int64_t{0}},
                {"solver", std::string("full")}};
    c.reset_bounds();
    return c;
  }

  static DRConfig pca_default() {
    DRConfig c;
    c.method = "pca";
    c.params = {{"seed", std::int64_t{0}}, {"solver", std::string("full")}};
    c.reset_bounds();
    return c;
  }

  static DRConfig external_default(const std::string& name) {
    DRConfig c;
    c.method = "external:" + name;
    c.params = {{"n_neighbors", std::int64_t{15}},
                {"min_dist", 0.1},
                {"n_pcs", std::int64_t{20}},
                {"seed", std::int64_t{0}},
                {"solver", std::string("full")}};
    c.reset_bounds();
    return c;
  }

  static DRConfig for_method(const std::string& method) {
    if (method == "tsne") return tsne_baseline();
    if (method == "pca") return pca_default();
    if (method.rfind("external:", 0) == 0 && method.size() > 9) {
      return external_default(method.substr(9));
    }
    throw InputError("unknown method '" + method + "' (expected tsne, pca or external:<name>)");
  }

  bool is_external() const { return method.rfind("external:", 0) == 0; }

  /// "tsne", "pca" or the backend name; used as the dotted prefix in
  /// recommendations such as "tsne.perplexity".
  std::string family() const { return is_external() ? method.substr(9) : method; }

  /// Parameter names that may be set for this method.
  std::vector<std::string> allowed_parameters() const {
    if (method == "tsne") return {"learning_rate", "n_iter", "n_pcs", "perplexity", "seed", "solver"};
    if (method == "pca") return {"n_pcs", "seed", "solver"};
    return {"FP_ratio", "MN_ratio", "min_dist", "n_neighbors", "n_pcs", "seed", "solver"};
  }

  bool allows(const std::string& name) const {
    const auto a = allowed_parameters();
    return std::find(a.begin(), a.end(), name) != a.end();
  }

  /// Maps "tsne.perplexity" or "perplexity" to "perplexity" when valid for
  /// this method.
  std::optional<std::string> resolve(const std::string& dotted) const {
    std::string name = dotted;
    if (const auto dot = dotted.find('.'); dot != std::string::npos) {
      if (dotted.substr(0, dot) != family()) return std::nullopt;
      name = dotted.substr(dot + 1);
    }
    if (!allows(name)) return std::nullopt;
    return name;
  }

  void reset_bounds() {
    bounds.clear();
    for (const auto& name : allowed_parameters()) {
      const auto& spec = parameter_catalog().at(name);
      if (spec.kind != ParamKind::Choice) bounds[name] = {spec.min, spec.max};
    }
  }

  /// Tightens bounds that depend on the dataset: n_pcs <= min(100, n, d) and,
  /// for t-SNE, 3 * perplexity < n.
  void fit_bounds_to_data(std::size_t n, std::size_t d) {
    if (auto it = bounds.find("n_pcs"); it != bounds.end()) {
      it->second.max = std::min({it->second.max, static_cast<double>(d), static_cast<double>(n)});
      it->second.min = std::min(it->second.min, it->second.max);
    }
    if (auto it = bounds.find("perplexity"); it != bounds.end()) {
      // Largest value strictly below n/3, kept on a 0.01 grid.
      const double feasible = std::floor((static_cast<double>(n) / 3.0 - 1e-9) * 100.0) / 100.0;
      it->second.max = std::min(it->second.max, feasible);
      it->second.min = std::min(it->second.min, it->second.max);
    }
    if (auto it = bounds.find("n_neighbors"); it != bounds.end()) {
      it->second.max = std::min(it->second.max, static_cast<double>(n - 1));
      it->second.min = std::min(it->second.min, it->second.max);
    }
  }

  /// Moves numeric values into their bounds; returns one message per change.
  std::vector<std::string> clamp_to_bounds() {
    std::vector<std::string> changes;
    for (auto& [name, value] : params) {
      const auto b = bounds.find(name);
      if (b == bounds.end() || std::holds_alternative<std::string>(value)) continue;
      const double v = number(name);
      const double c = std::clamp(v, b->second.min, b->second.max);
      if (c == v) continue;
      if (std::holds_alternative<std::int64_t>(value)) {
        value = static_cast<std::int64_t>(std::floor(c));
      } else {
        value = c;
      }
      changes.push_back(name + " " + format_exact(v) + " moved into [" + format_exact(b->second.min) + ", " +
                        format_exact(b->second.max) + "] for this dataset");
    }
    return changes;
  }

  bool has(const std::string& name) const { return params.count(name) != 0; }

  double number(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end()) throw InputError("config: missing parameter '" + name + "'");
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    if (const auto* r = std::get_if<double>(&it->second)) return *r;
    throw InputError("config: parameter '" + name + "' is not numeric");
  }

  std::int64_t integer(const std::string& name) const {
    return static_cast<std::int64_t>(std::llround(number(name)));
  }

  std::string choice(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end()) throw InputError("config: missing parameter '" + name + "'");
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw InputError("config: parameter '" + name + "' is not a string");
  }

  std::string choice_or(const std::string& name, const std::string& fallback) const {
    return has(name) ? choice(name) : fallback;
  }
  std::int64_t integer_or(const std::string& name, std::int64_t fallback) const {
    return has(name) ? integer(name) : fallback;
  }

  /// Throws InputError on unknown keys, wrong types, out-of-bounds values or
  /// missing method-required parameters.
  void validate() const {
    if (method != "tsne" && method != "pca" && !(is_external() && method.size() > 9)) {
      throw InputError("config: unknown method '" + method + "'");
    }
    for (const auto& [name, value] : params) {
      if (!allows(name)) {
        throw InputError("config: parameter '" + name + "' is not valid for method " + method);
      }
      const auto& spec = parameter_catalog().at(name);
      if (spec.kind == ParamKind::Choice) {
        const auto* s = std::get_if<std::string>(&value);
        if (!s || std::find(spec.choices.begin(), spec.choices.end(), *s) == spec.choices.end()) {
          throw InputError("config: invalid value for '" + name + "'");
        }
        continue;
      }
      if (spec.kind == ParamKind::Integer && !std::holds_alternative<std::int64_t>(value)) {
        throw InputError("config: parameter '" + name + "' must be an integer");
      }
      if (std::holds_alternative<std::string>(value)) {
        throw InputError("config: parameter '" + name + "' must be numeric");
      }
      const double v = number(name);
      if (!std::isfinite(v)) throw InputError("config: parameter '" + name + "' is not finite");
      if (auto b = bounds.find(name); b != bounds.end()) {
        if (v < b->second.min || v > b->second.max) {
          throw InputError("config: " + name + "=" + format_exact(v) + " outside [" +
                           format_exact(b->second.min) + ", " + format_exact(b->second.max) + "]");
        }
      }
    }
    if (method == "tsne") {
      for (const char* req : {"perplexity", "learning_rate", "n_iter", "n_pcs"}) {
        if (!has(req)) throw InputError(std::string("config: t-SNE requires '") + req + "'");
      }
    }
  }

  friend bool operator==(const DRConfig&, const DRConfig&) = default;
};

/// Result of interpreting a textual value for a parameter.
struct CoercedValue {
  ParamValue value;
  bool clamped = false;
  bool rounded = false;
};

/// Parses `text` as the type of `name` and clamps it into `config`'s bounds.
/// Throws InputError when the text does not parse.
inline CoercedValue coerce_parameter(const DRConfig& config, const std::string& name,
                                     const std::string& text) {
  const auto& spec = parameter_catalog().at(name);
  CoercedValue out;
  if (spec.kind == ParamKind::Choice) {
    if (std::find(spec.choices.begin(), spec.choices.end(), text) == spec.choices.end()) {
      throw InputError("value '" + text + "' is not a valid choice for " + name);
    }
    out.value = text;
    return out;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError("value '" + text + "' for " + name + " is not a number");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size() || !std::isfinite(v)) {
    throw InputError("value '" + text + "' for " + name + " is not a number");
  }
  if (auto b = config.bounds.find(name); b != config.bounds.end()) {
    const double c = std::clamp(v, b->second.min, b->second.max);
    out.clamped = c != v;
    v = c;
  }
  if (spec.kind == ParamKind::Integer) {
    const double r = std::round(v);
    out.rounded = r != v;
    out.value = static_cast<std::int64_t>(r);
  } else {
    out.value = v;
  }
  return out;
}

inline std::string to_text(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* r = std::get_if<double>(&v)) {
    return nlohmann::json(*r).dump();
  }
  return std::get<std::string>(v);
}

using json = nlohmann::ordered_json;

inline json param_to_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

/// The "parameters" block of the agent prompt: method first, then parameters
/// in name order.
inline json parameters_block(const DRConfig& c) {
  json out = json::object();
  out["method"] = c.method;
  for (const auto& [name, value] : c.params) out[name] = param_to_json(value);
  return out;
}

inline json to_json(const DRConfig& c) {
  json bounds = json::object();
  for (const auto& [name, b] : c.bounds) bounds[name] = json::array({b.min, b.max});
  json params = json::object();
  for (const auto& [name, value] : c.params) params[name] = param_to_json(value);
  return {{"method", c.method}, {"params", params}, {"bounds", bounds}};
}

inline ParamValue param_from_json(const std::string& name, const json& v) {
  const auto spec = parameter_catalog().find(name);
  if (spec == parameter_catalog().end()) throw InputError("unknown parameter '" + name + "'");
  if (spec->second.kind == ParamKind::Choice) return v.get<std::string>();
  if (spec->second.kind == ParamKind::Integer) {
    const double d = v.get<double>();
    if (d != std::round(d)) throw InputError("parameter '" + name + "' must be an integer");
    return static_cast<std::int64_t>(d);
  }
  return v.get<double>();
}

inline DRConfig config_from_json(const json& j) {
  DRConfig c;
  c.method = j.at("method").get<std::string>();
  for (const auto& [name, v] : j.at("params").items()) c.params[name] = param_from_json(name, v);
  if (j.contains("bounds")) {
    for (const auto& [name, b] : j.at("bounds").items()) {
      c.bounds[name] = {b.at(0).get<double>(), b.at(1).get<double>()};
    }
  } else {
    c.reset_bounds();
  }
  return c;
}

}  // namespace vistune
