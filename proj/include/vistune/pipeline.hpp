#pragma once

// The refinement loop: embed, evaluate, summarize, ask the agent, apply.

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "vistune/agent.hpp"
#include "vistune/backend.hpp"
#include "vistune/composite.hpp"
#include "vistune/csv.hpp"
#include "vistune/diagnostic.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/embedding.hpp"
#include "vistune/hierarchy.hpp"
#include "vistune/llm_agent.hpp"
#include "vistune/metrics.hpp"
#include "vistune/prompt.hpp"
#include "vistune/render.hpp"
#include "vistune/report_json.hpp"

namespace vistune {

enum class ScoreMode { Implicit, Explicit };

inline std::string to_string(ScoreMode m) { return m == ScoreMode::Implicit ? "implicit" : "explicit"; }

inline ScoreMode parse_score_mode(const std::string& s) {
  if (s == "implicit") return ScoreMode::Implicit;
  if (s == "explicit") return ScoreMode::Explicit;
  throw InputError("unknown mode '" + s + "' (expected implicit or explicit)");
}

/// Default convergence threshold on the mode's score scale (0-10 or 0-1).
inline double default_epsilon(ScoreMode m) { return m == ScoreMode::Implicit ? 0.05 : 0.005; }

enum class StopReason { None, Converged, MaxIterations, AgentEmptyRecommendations, Error };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::AgentEmptyRecommendations: return "agent_empty_recommendations";
    case StopReason::Error: return "error";
    case StopReason::None: break;
  }
  return "none";
}

inline StopReason parse_stop_reason(const std::string& s) {
  for (auto r : {StopReason::None, StopReason::Converged, StopReason::MaxIterations,
                 StopReason::AgentEmptyRecommendations, StopReason::Error}) {
    if (to_string(r) == s) return r;
  }
  throw InputError("unknown stop reason '" + s + "'");
}

/// Converged when the last `patience` score changes are all below epsilon,
/// or when the agent asked for no changes.
inline StopReason check_convergence(const std::vector<double>& scores, double epsilon,
                                    std::size_t patience, bool empty_recommendations) {
  if (empty_recommendations) return StopReason::AgentEmptyRecommendations;
  if (patience == 0 || scores.size() < patience + 1) return StopReason::None;
  for (std::size_t i = scores.size() - patience; i < scores.size(); ++i) {
    if (!(std::abs(scores[i] - scores[i - 1]) < epsilon)) return StopReason::None;
  }
  return StopReason::Converged;
}

/// Extra neighborhood metrics named in follow_up_metrics, e.g.
/// "trustworthiness at k=30". Anything else is ignored.
inline std::vector<std::pair<std::string, std::size_t>> parse_follow_up_requests(
    const std::vector<std::string>& texts) {
  static const std::regex re(R"((trustworthiness|continuity)[^0-9]*?\bk\s*[=:]?\s*(\d+))",
                             std::regex::icase);
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& t : texts) {
    for (auto it = std::sregex_iterator(t.begin(), t.end(), re); it != std::sregex_iterator(); ++it) {
      std::string name = (*it)[1].str();
      std::transform(name.begin(), name.end(), name.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      const std::size_t k = std::stoul((*it)[2].str());
      if (k == 0) continue;
      std::pair<std::string, std::size_t> req{name, k};
      if (std::find(out.begin(), out.end(), req) == out.end()) out.push_back(req);
    }
  }
  return out;
}

struct IterationRecord {
  std::size_t iteration = 0;
  DRConfig config;
  std::string error;  // non-empty when the iteration failed
  bool evaluated = false;

  // Evaluation state (valid when evaluated).
  DataMatrix embedding;
  Labels display_labels;  // dataset labels, or k-means cluster ids when unlabeled
  std::string tree_labels;  // "labels" or "kmeans"
  std::string hd_dimension;
  MetricsReport metrics;
  Dendrogram tree_hd;
  Dendrogram tree_2d;
  double composite = 0.0;
  std::vector<std::string> notes;
  nlohmann::ordered_json embedding_diagnostics = nlohmann::ordered_json::object();
  double elapsed_seconds = 0.0;
  std::vector<std::pair<std::string, std::size_t>> follow_up_requests;

  // Agent state.
  std::optional<DiagnosticReport> diagnostic;
  std::vector<std::string> raw_responses;
  std::vector<std::string> apply_warnings;

  std::optional<double> quality_score() const {
    if (diagnostic) return diagnostic->quality_score;
    return std::nullopt;
  }
};

struct Trajectory {
  std::string run_id;
  std::string dataset;
  std::string label_column = "label";
  ScoreMode mode = ScoreMode::Explicit;
  std::string agent;
  WeightVector weights = WeightVector::preset("gpt-5.2");
  ReportOptions report_options;
  std::size_t kmeans_k = 10;
  std::uint64_t seed = 0;
  double epsilon = 0.005;
  std::size_t patience = 2;
  std::size_t max_iterations = 10;
  PlotSpec plot;
  std::vector<IterationRecord> records;
  std::optional<std::size_t> best;  // index into records
  StopReason stop_reason = StopReason::None;
  std::string error;

  std::optional<double> selected_score(std::size_t i) const {
    const auto& r = records.at(i);
    if (!r.evaluated) return std::nullopt;
    if (mode == ScoreMode::Explicit) return r.composite;
    return r.quality_score();
  }

  /// Argmax of the selected-mode score, earliest on ties.
  void update_best() {
    best.reset();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto s = selected_score(i);
      if (s && (!best || *s > *selected_score(*best))) best = i;
    }
  }
};

struct PipelineOptions {
  std::string run_id;
  std::string dataset_name;
  std::string label_column = "label";
  ScoreMode mode = ScoreMode::Explicit;
  std::size_t max_iterations = 10;
  std::optional<double> epsilon;
  std::size_t patience = 2;
  ReportOptions report;
  std::size_t kmeans_k = 10;
  std::uint64_t seed = 0;
  PlotSpec plot;
  const BackendRegistry* registry = nullptr;
  BackendOptions backend;
  std::optional<std::filesystem::path> out_dir;  // artifacts rewritten after every iteration
};

namespace detail {

inline std::string iter_file(std::size_t k, const std::string& suffix) {
  return "iter_" + std::to_string(k) + "_" + suffix;
}

inline PlotSpec scatter_spec(const Trajectory& t, const IterationRecord& r) {
  PlotSpec s = t.plot;
  s.title = "Iteration " + std::to_string(r.iteration) + ": " + r.config.method;
  return s;
}

inline PlotSpec dendro_spec(const Trajectory& t, const IterationRecord& r, const std::string& space) {
  PlotSpec s = t.plot;
  s.title = "Iteration " + std::to_string(r.iteration) + " dendrogram (" + space + ")";
  return s;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
  if (!out) throw InputError("failed writing " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Trees {
  Dendrogram hd, ld;
  Labels labels;
  std::string source;
};

// Dendrograms over label centroids, or k-means clusters of the reference
// space when there are fewer than two labels.
inline Trees build_trees(const DataMatrix& hd, const DataMatrix& embedding, const Labels& labels,
                         std::size_t kmeans_k, std::uint64_t seed) {
  Trees t;
  if (!labels.empty() && encode_labels(labels).names.size() >= 2) {
    t.labels = labels;
    t.source = "labels";
  } else {
    t.labels = kmeans_labels(hd, std::min(kmeans_k, hd.rows()), seed);
    t.source = "kmeans";
  }
  const Centroids chd = label_centroids(hd, t.labels);
  const Centroids cld = label_centroids(embedding, t.labels);
  t.hd = upgma(pairwise_distances(chd.points), chd.names);
  t.ld = upgma(pairwise_distances(cld.points), cld.names);
  return t;
}

}  // namespace detail

inline nlohmann::ordered_json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::ordered_json merges = nlohmann::ordered_json::array();
  for (const auto& m : d.merges) merges.push_back({m.left, m.right, m.height, m.size});
  return {{"newick", to_newick(d)}, {"leaves", d.leaves}, {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::ordered_json& j) {
  Dendrogram d;
  d.leaves = j.at("leaves").get<std::vector<std::string>>();
  for (const auto& m : j.at("merges")) {
    d.merges.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(),
                        m.at(2).get<double>(), m.at(3).get<std::size_t>()});
  }
  d.validate();
  return d;
}

/// The prompt exactly as the agent saw it for this record.
inline MasterPrompt record_prompt(const IterationRecord& r) {
  return build_master_prompt(r.metrics, r.tree_hd, r.hd_dimension, r.tree_2d, r.config, r.iteration);
}

/// Every file export_trajectory writes, keyed by file name.
inline std::map<std::string, std::string> trajectory_files(const Trajectory& t) {
  using nlohmann::ordered_json;
  std::map<std::string, std::string> files;

  ordered_json iterations = ordered_json::array();
  std::string csv =
      "iteration,Spearman Correlation,Stress-1,Mean Distance Ratio,Trustworthiness,Continuity,"
      "Silhouette Score,LOF Median,LOF Outliers,composite_score,quality_score\n";

  for (const auto& r : t.records) {
    const auto k = r.iteration;
    ordered_json rec;
    rec["iteration"] = k;
    rec["config"] = to_json(r.config);
    rec["evaluated"] = r.evaluated;
    if (!r.error.empty()) rec["error"] = r.error;
    ordered_json artifacts = ordered_json::object();

    if (r.evaluated) {
      const MasterPrompt prompt = record_prompt(r);
      files[detail::iter_file(k, "prompt.json")] = prompt.dump();
      artifacts["prompt"] = detail::iter_file(k, "prompt.json");

      files[detail::iter_file(k, "metrics.json")] = to_json(r.metrics).dump(2) + "\n";
      artifacts["metrics"] = detail::iter_file(k, "metrics.json");

      ordered_json trees = {{"leaf_source", r.tree_labels},
                            {"hd", dendrogram_to_json(r.tree_hd)},
                            {"2d", dendrogram_to_json(r.tree_2d)}};
      files[detail::iter_file(k, "trees.json")] = trees.dump(2) + "\n";
      artifacts["trees"] = detail::iter_file(k, "trees.json");

      std::string emb = "x,y,label\n";
      for (std::size_t i = 0; i < r.embedding.rows(); ++i) {
        emb += format_exact(r.embedding(i, 0)) + "," + format_exact(r.embedding(i, 1)) + "," +
               detail::csv_field(r.display_labels.empty() ? std::string() : r.display_labels[i]) + "\n";
      }
      files[detail::iter_file(k, "embedding.csv")] = emb;
      artifacts["embedding"] = detail::iter_file(k, "embedding.csv");

      files[detail::iter_file(k, "scatter.svg")] =
          render_scatter(r.embedding, r.display_labels, detail::scatter_spec(t, r));
      files[detail::iter_file(k, "dendro_hd.svg")] =
          render_dendrogram(r.tree_hd, detail::dendro_spec(t, r, r.hd_dimension));
      files[detail::iter_file(k, "dendro_2d.svg")] =
          render_dendrogram(r.tree_2d, detail::dendro_spec(t, r, "2D"));
      artifacts["scatter"] = detail::iter_file(k, "scatter.svg");
      artifacts["dendro_hd"] = detail::iter_file(k, "dendro_hd.svg");
      artifacts["dendro_2d"] = detail::iter_file(k, "dendro_2d.svg");

      rec["hd_dimension"] = r.hd_dimension;
      rec["leaf_source"] = r.tree_labels;
      rec["composite_score"] = r.composite;
      rec["quality_score"] = r.quality_score() ? ordered_json(*r.quality_score()) : ordered_json(nullptr);
      rec["notes"] = r.notes;
      rec["embedding_diagnostics"] = r.embedding_diagnostics;
      rec["elapsed_seconds"] = r.elapsed_seconds;
      ordered_json fu = ordered_json::array();
      for (const auto& [name, fk] : r.follow_up_requests) fu.push_back({{"metric", name}, {"k", fk}});
      rec["follow_up_requests"] = fu;

      const auto& m = r.metrics;
      csv += std::to_string(k) + "," + format_exact(m.spearman) + "," + format_exact(m.stress) + "," +
             format_exact(m.mean_distance_ratio) + "," + format_exact(m.trustworthiness.value) + "," +
             format_exact(m.continuity.value) + "," +
             (m.silhouette ? format_exact(*m.silhouette) : std::string()) + "," +
             format_exact(m.lof.median) + "," + std::to_string(m.lof.outlier_count) + "," +
             format_exact(r.composite) + "," +
             (r.quality_score() ? format_exact(*r.quality_score()) : std::string()) + "\n";
    }
    if (r.diagnostic) {
      files[detail::iter_file(k, "response.json")] = to_json(*r.diagnostic).dump(2) + "\n";
      artifacts["response"] = detail::iter_file(k, "response.json");
      rec["diagnostic_warnings"] = r.diagnostic->warnings;
    }
    ordered_json raws = ordered_json::array();
    for (std::size_t a = 0; a < r.raw_responses.size(); ++a) {
      const std::string name = detail::iter_file(k, "raw_" + std::to_string(a + 1) + ".txt");
      files[name] = r.raw_responses[a];
      raws.push_back(name);
    }
    artifacts["raw_responses"] = raws;
    rec["apply_warnings"] = r.apply_warnings;
    rec["artifacts"] = artifacts;
    iterations.push_back(rec);
  }
  files["metrics.csv"] = csv;

  ordered_json plot = {{"width", t.plot.width},
                       {"height", t.plot.height},
                       {"margin", t.plot.margin},
                       {"point_radius", t.plot.point_radius},
                       {"legend", t.plot.legend == LegendPlacement::Right ? "right" : "none"},
                       {"legend_width", t.plot.legend_width},
                       {"palette", t.plot.palette}};
  ordered_json manifest;
  manifest["run_id"] = t.run_id;
  manifest["dataset"] = t.dataset;
  manifest["label_column"] = t.label_column;
  manifest["mode"] = to_string(t.mode);
  manifest["agent"] = t.agent;
  manifest["weights"] = t.weights.to_json();
  manifest["options"] = {{"k", t.report_options.k},
                         {"lof_k", t.report_options.lof_k},
                         {"lof_threshold", t.report_options.lof_threshold},
                         {"max_points", t.report_options.max_points},
                         {"report_seed", t.report_options.seed},
                         {"kmeans_k", t.kmeans_k},
                         {"seed", t.seed},
                         {"epsilon", t.epsilon},
                         {"patience", t.patience},
                         {"max_iterations", t.max_iterations},
                         {"plot", plot}};
  manifest["stop_reason"] = to_string(t.stop_reason);
  if (!t.error.empty()) manifest["error"] = t.error;
  manifest["best_iteration"] = t.best ? ordered_json(t.records[*t.best].iteration) : ordered_json(nullptr);
  manifest["metrics_csv"] = "metrics.csv";
  manifest["iterations"] = iterations;
  files["run.json"] = manifest.dump(2) + "\n";
  return files;
}

/// Writes the manifest, metrics table and per-iteration artifacts. Output
/// depends only on the trajectory, so exporting twice gives identical bytes.
/// Everything is rendered and the directory checked before any file is written.
inline std::vector<std::filesystem::path> export_trajectory(const Trajectory& t,
                                                            const std::filesystem::path& dir) {
  const auto files = trajectory_files(t);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw InputError("cannot create output directory " + dir.string() +
                     (ec ? ": " + ec.message() : std::string()));
  }
  if (::access(dir.c_str(), W_OK) != 0) {
    throw InputError("output directory " + dir.string() + " is not writable");
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    detail::write_text(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

/// Reads a trajectory written by export_trajectory.
inline Trajectory load_trajectory(const std::filesystem::path& dir) {
  using nlohmann::ordered_json;
  const auto manifest = ordered_json::parse(detail::read_text(dir / "run.json"));
  Trajectory t;
  t.run_id = manifest.at("run_id").get<std::string>();
  t.dataset = manifest.at("dataset").get<std::string>();
  t.label_column = manifest.value("label_column", "label");
  t.mode = parse_score_mode(manifest.at("mode").get<std::string>());
  t.agent = manifest.at("agent").get<std::string>();
  std::map<std::string, double> w;
  for (const auto& [name, v] : manifest.at("weights").items()) w[name] = v.get<double>();
  t.weights = WeightVector::from_map(w);
  const auto& o = manifest.at("options");
  t.report_options.k = o.at("k").get<std::size_t>();
  t.report_options.lof_k = o.at("lof_k").get<std::size_t>();
  t.report_options.lof_threshold = o.at("lof_threshold").get<double>();
  t.report_options.max_points = o.at("max_points").get<std::size_t>();
  t.report_options.seed = o.at("report_seed").get<std::uint64_t>();
  t.kmeans_k = o.at("kmeans_k").get<std::size_t>();
  t.seed = o.at("seed").get<std::uint64_t>();
  t.epsilon = o.at("epsilon").get<double>();
  t.patience = o.at("patience").get<std::size_t>();
  t.max_iterations = o.at("max_iterations").get<std::size_t>();
  const auto& p = o.at("plot");
  t.plot.width = p.at("width").get<int>();
  t.plot.height = p.at("height").get<int>();
  t.plot.margin = p.at("margin").get<double>();
  t.plot.point_radius = p.at("point_radius").get<double>();
  t.plot.legend = p.at("legend").get<std::string>() == "right" ? LegendPlacement::Right : LegendPlacement::None;
  t.plot.legend_width = p.at("legend_width").get<double>();
  t.plot.palette = p.at("palette").get<std::vector<std::string>>();
  t.stop_reason = parse_stop_reason(manifest.at("stop_reason").get<std::string>());
  t.error = manifest.value("error", "");

  for (const auto& rec : manifest.at("iterations")) {
    IterationRecord r;
    r.iteration = rec.at("iteration").get<std::size_t>();
    r.config = config_from_json(rec.at("config"));
    r.error = rec.value("error", "");
    r.evaluated = rec.at("evaluated").get<bool>();
    const auto& art = rec.at("artifacts");
    if (r.evaluated) {
      r.hd_dimension = rec.at("hd_dimension").get<std::string>();
      r.tree_labels = rec.at("leaf_source").get<std::string>();
      r.composite = rec.at("composite_score").get<double>();
      r.notes = rec.at("notes").get<std::vector<std::string>>();
      r.embedding_diagnostics = rec.at("embedding_diagnostics");
      r.elapsed_seconds = rec.at("elapsed_seconds").get<double>();
      for (const auto& f : rec.at("follow_up_requests")) {
        r.follow_up_requests.emplace_back(f.at("metric").get<std::string>(), f.at("k").get<std::size_t>());
      }
      r.metrics = metrics_from_json(
          ordered_json::parse(detail::read_text(dir / art.at("metrics").get<std::string>())));
      const auto trees = ordered_json::parse(detail::read_text(dir / art.at("trees").get<std::string>()));
      r.tree_hd = dendrogram_from_json(trees.at("hd"));
      r.tree_2d = dendrogram_from_json(trees.at("2d"));
      const Dataset emb = read_dataset(dir / art.at("embedding").get<std::string>(), "label");
      r.embedding = emb.features;
      const bool any_label = std::any_of(emb.labels.begin(), emb.labels.end(),
                                         [](const std::string& s) { return !s.empty(); });
      if (any_label) r.display_labels = emb.labels;
    }
    if (art.contains("response")) {
      r.diagnostic = parse_diagnostic(detail::read_text(dir / art.at("response").get<std::string>()));
      r.diagnostic->warnings = rec.value("diagnostic_warnings", std::vector<std::string>{});
    }
    for (const auto& name : art.at("raw_responses")) {
      r.raw_responses.push_back(detail::read_text(dir / name.get<std::string>()));
    }
    r.apply_warnings = rec.at("apply_warnings").get<std::vector<std::string>>();
    t.records.push_back(std::move(r));
  }
  t.update_best();
  return t;
}

struct ReplayReport {
  std::size_t compared = 0;
  std::vector<std::string> mismatched;  // file names whose bytes differ
  std::vector<std::string> missing;     // expected in the source directory but absent
  bool recomputed = false;              // metrics and trees re-derived from the dataset
  std::vector<std::string> recompute_mismatches;
  bool ok() const { return mismatched.empty() && missing.empty() && recompute_mismatches.empty(); }
};

/// Loads a stored trajectory, optionally re-derives metrics and trees from the
/// dataset, re-renders every prompt and SVG and compares the bytes with the
/// stored files. Writes the regenerated set to `out_dir` when given.
inline ReplayReport replay_trajectory(const std::filesystem::path& dir,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                      bool recompute = true) {
  Trajectory t = load_trajectory(dir);
  ReplayReport rep;
  if (recompute && !t.dataset.empty() && std::filesystem::exists(t.dataset)) {
    const Dataset data = read_dataset(t.dataset, t.label_column);
    rep.recomputed = true;
    for (auto& r : t.records) {
      if (!r.evaluated) continue;
      const PreparedInput input = prepare_input(data.features, r.config);
      ReportOptions ro = t.report_options;
      ro.follow_up = r.follow_up_requests;
      const MetricsReport m = assemble_report(input.data, r.embedding, data.labels, ro);
      const auto trees = detail::build_trees(input.data, r.embedding, data.labels, t.kmeans_k, t.seed);
      const std::string tag = "iteration " + std::to_string(r.iteration);
      if (!(m == r.metrics)) rep.recompute_mismatches.push_back(tag + " metrics");
      if (!(trees.hd == r.tree_hd)) rep.recompute_mismatches.push_back(tag + " hd tree");
      if (!(trees.ld == r.tree_2d)) rep.recompute_mismatches.push_back(tag + " 2d tree");
      if (input.dimension != r.hd_dimension) rep.recompute_mismatches.push_back(tag + " dimension");
      r.metrics = m;
      r.tree_hd = trees.hd;
      r.tree_2d = trees.ld;
      r.hd_dimension = input.dimension;
    }
  }
  const auto files = trajectory_files(t);
  for (const auto& [name, text] : files) {
    const bool checked = name.ends_with("_prompt.json") || name.ends_with(".svg");
    if (!checked) continue;
    ++rep.compared;
    if (!std::filesystem::exists(dir / name)) {
      rep.missing.push_back(name);
    } else if (detail::read_text(dir / name) != text) {
      rep.mismatched.push_back(name);
    }
  }
  if (out_dir) export_trajectory(t, *out_dir);
  return rep;
}

/// Runs the refinement loop until convergence, an empty recommendation list,
/// the iteration cap, or an error. Failures end the run with the partial
/// trajectory intact.
inline Trajectory run_pipeline(const Dataset& dataset, const DRConfig& initial, Agent& agent,
                               const WeightVector& weights, const PipelineOptions& opt = {}) {
  Trajectory t;
  t.dataset = dataset.source.empty() ? opt.dataset_name : dataset.source;
  t.run_id = !opt.run_id.empty() ? opt.run_id
                                 : "run-" + std::filesystem::path(t.dataset.empty() ? "data" : t.dataset).stem().string();
  t.label_column = opt.label_column;
  t.mode = opt.mode;
  t.agent = agent.name();
  t.weights = weights;
  t.report_options = opt.report;
  t.kmeans_k = opt.kmeans_k;
  t.seed = opt.seed;
  t.epsilon = opt.epsilon.value_or(default_epsilon(opt.mode));
  t.patience = opt.patience;
  t.max_iterations = opt.max_iterations;
  t.plot = opt.plot;
  if (opt.max_iterations == 0) throw InputError("max iterations must be at least 1");

  const DataMatrix& raw = dataset.features;
  DRConfig config = initial;
  config.fit_bounds_to_data(raw.rows(), raw.cols());
  const std::vector<std::string> fitted = config.clamp_to_bounds();
  std::vector<std::pair<std::string, std::size_t>> follow_up;
  std::vector<double> scores;

  auto checkpoint = [&] {
    t.update_best();
    if (opt.out_dir) export_trajectory(t, *opt.out_dir);
  };

  for (std::size_t iter = 1; iter <= opt.max_iterations; ++iter) {
    IterationRecord rec;
    rec.iteration = iter;
    rec.config = config;
    rec.follow_up_requests = follow_up;
    if (iter == 1) rec.notes = fitted;
    try {
      const PreparedInput input = prepare_input(raw, config);
      EmbeddingResult emb = embed_prepared(raw, input, config, opt.registry, opt.backend);
      ReportOptions ro = opt.report;
      ro.follow_up = follow_up;
      rec.metrics = assemble_report(input.data, emb.coordinates, dataset.labels, ro);
      auto trees = detail::build_trees(input.data, emb.coordinates, dataset.labels, opt.kmeans_k, opt.seed);
      rec.embedding = std::move(emb.coordinates);
      rec.embedding_diagnostics = std::move(emb.diagnostics);
      rec.elapsed_seconds = emb.elapsed_seconds;
      rec.hd_dimension = input.dimension;
      rec.tree_hd = std::move(trees.hd);
      rec.tree_2d = std::move(trees.ld);
      rec.tree_labels = trees.source;
      rec.display_labels = dataset.labels.empty() ? trees.labels : dataset.labels;
      rec.composite = explicit_composite_score(rec.metrics, weights, &rec.notes);
      rec.evaluated = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
      t.records.push_back(std::move(rec));
      t.stop_reason = StopReason::Error;
      t.error = "iteration " + std::to_string(iter) + ": " + e.what();
      checkpoint();
      return t;
    }

    MasterPrompt prompt = record_prompt(rec);
    if (opt.out_dir) {
      std::filesystem::create_directories(*opt.out_dir);
      const auto plot = *opt.out_dir / detail::iter_file(iter, "scatter.svg");
      detail::write_text(plot, render_scatter(rec.embedding, rec.display_labels, detail::scatter_spec(t, rec)));
      prompt.plot = plot;
    }
    try {
      AgentTurn turn = agent.step(prompt, rec.metrics, config);
      rec.raw_responses = std::move(turn.raw_responses);
      rec.diagnostic = std::move(turn.report);
    } catch (const AgentError& e) {
      for (const auto& a : e.attempts()) {
        if (!a.raw.empty()) rec.raw_responses.push_back(a.raw);
      }
      if (rec.raw_responses.empty() && !e.last_raw().empty()) rec.raw_responses.push_back(e.last_raw());
      rec.error = e.what();
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    if (!rec.error.empty()) {
      t.records.push_back(std::move(rec));
      t.stop_reason = StopReason::Error;
      t.error = "iteration " + std::to_string(iter) + ": " + t.records.back().error;
      checkpoint();
      return t;
    }

    scores.push_back(opt.mode == ScoreMode::Explicit ? rec.composite : *rec.quality_score());
    const StopReason decision =
        check_convergence(scores, t.epsilon, opt.patience, rec.diagnostic->recommendations.empty());
    const DiagnosticReport diagnostic = *rec.diagnostic;
    t.records.push_back(std::move(rec));
    if (decision != StopReason::None) {
      t.stop_reason = decision;
      checkpoint();
      return t;
    }
    if (iter == opt.max_iterations) {
      t.stop_reason = StopReason::MaxIterations;
      checkpoint();
      return t;
    }
    AppliedConfig next = apply_recommendations(config, diagnostic);
    t.records.back().apply_warnings = next.warnings;
    config = std::move(next.config);
    follow_up = parse_follow_up_requests(diagnostic.follow_up_metrics);
    checkpoint();
  }
  t.stop_reason = StopReason::MaxIterations;
  checkpoint();
  return t;
}

}  // namespace vistune
