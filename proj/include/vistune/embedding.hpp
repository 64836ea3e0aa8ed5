#pragma once

#include <chrono>
#include <string>

#include "json.hpp"

#include "vistune/backend.hpp"
#include "vistune/core.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/pca.hpp"
#include "vistune/tsne.hpp"

namespace vistune {

struct EmbeddingResult {
  DataMatrix coordinates;
  DRConfig config;
  nlohmann::ordered_json diagnostics;
  double elapsed_seconds = 0.0;
};

/// The representation fed to the DR method and used as the high-dimensional
/// reference for metrics and dendrograms.
struct PreparedInput {
  DataMatrix data;
  std::string dimension;  // e.g. "20D (PCA)"
};

enum class ReferenceSpace { Pca, Raw };

/// Reduces to n_pcs principal components when the config has n_pcs (and the
/// reference space is PCA); otherwise passes the raw features through.
inline PreparedInput prepare_input(const DataMatrix& raw, const DRConfig& config,
                                   ReferenceSpace space = ReferenceSpace::Pca) {
  if (space == ReferenceSpace::Pca && config.has("n_pcs")) {
    const auto requested = config.integer("n_pcs");
    if (requested <= 0) throw InputError("n_pcs must be positive");
    const std::size_t k = std::min({static_cast<std::size_t>(requested), raw.rows(), raw.cols()});
    const auto solver = parse_pca_solver(config.choice_or("solver", "full"));
    const auto seed = static_cast<std::uint64_t>(config.integer_or("seed", 0));
    return {pca(raw, k, solver, seed), std::to_string(k) + "D (PCA)"};
  }
  return {raw, std::to_string(raw.cols()) + "D"};
}

/// Dispatches an already-prepared input to the configured method.
inline EmbeddingResult embed_prepared(const DataMatrix& raw, const PreparedInput& input,
                                      const DRConfig& config,
                                      const BackendRegistry* registry = nullptr,
                                      const BackendOptions& backend_options = {}) {
  if (config.method != "tsne" && config.method != "pca" && !config.is_external()) {
    std::string known = "tsne, pca";
    if (registry) known += ", external:{" + registry->names_joined() + "}";
    throw InputError("unknown method '" + config.method + "' (registered: " + known + ")");
  }
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  EmbeddingResult result;
  result.config = config;
  result.diagnostics = nlohmann::ordered_json::object();
  result.diagnostics["input_dimension"] = input.data.cols();
  if (config.method == "tsne") {
    TsneOptions opt = tsne_options_from(config);
    const TsneResult t = tsne_embed(input.data, opt);
    result.coordinates = t.coordinates;
    auto& d = result.diagnostics;
    d["kl_after_exaggeration"] = t.kl_after_exaggeration;
    d["final_kl"] = t.final_kl;
    d["iterations"] = opt.n_iter;
    d["exaggeration"] = opt.exaggeration;
    d["exaggeration_iters"] = t.exaggeration_iters;
    d["momentum"] = {opt.initial_momentum, opt.final_momentum};
    d["init_std"] = opt.init_std;
    d["perplexity_tolerance"] = opt.perplexity_tolerance;
    d["max_perplexity_error"] = t.max_perplexity_error;
    auto trace = nlohmann::ordered_json::array();
    for (const auto& tp : t.trace) trace.push_back({tp.iteration, tp.kl});
    d["kl_trace"] = trace;
  } else if (config.method == "pca") {
    const auto solver = parse_pca_solver(config.choice_or("solver", "full"));
    const auto seed = static_cast<std::uint64_t>(config.integer_or("seed", 0));
    const PcaFit fit = pca_fit(raw, 2, solver, seed);
    result.coordinates = fit.scores;
    result.diagnostics["input_dimension"] = raw.cols();
    result.diagnostics["explained_variance"] = fit.explained_variance;
  } else {
    if (!registry) {
      throw InputError("no backend registered for " + config.method + " (registered: none)");
    }
    BackendOutput out = run_external_backend(input.data, config, *registry, backend_options);
    result.coordinates = std::move(out.coordinates);
    if (!out.stderr_text.empty()) result.diagnostics["backend_stderr"] = out.stderr_text;
  }
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// PCA preprocessing (when requested) followed by the configured method.
inline EmbeddingResult compute_embedding(const DataMatrix& dataset, const DRConfig& config,
                                         const BackendRegistry* registry = nullptr,
                                         const BackendOptions& backend_options = {}) {
  const PreparedInput input = prepare_input(dataset, config);
  return embed_prepared(dataset, input, config, registry, backend_options);
}

}  // namespace vistune
