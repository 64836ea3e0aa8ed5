// vistune command line: run the refinement loop, evaluate one configuration,
// replay a stored trajectory, or generate a blob dataset.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vistune/vistune.hpp"

namespace {

using nlohmann::json;
using namespace vistune;

struct Settings {
  std::string data;
  std::string label_col = "label";
  std::string method = "tsne";
  std::string mode = "explicit";
  std::string agent = "mock";
  std::string weights = "gpt-5.2";
  std::size_t max_iter = 10;
  std::optional<double> epsilon;
  std::size_t patience = 2;
  std::optional<std::int64_t> seed;
  std::string out;
  std::size_t k = 10;
  std::size_t lof_k = 20;
  std::size_t max_points = 2000;
  std::size_t kmeans_k = 10;
  std::vector<std::pair<std::string, std::string>> params;    // name, text
  std::vector<std::pair<std::string, std::string>> backends;  // name, command line
  double backend_timeout = 600.0;
  LlmEndpoint llm;
};

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InputError(std::string(what) + " '" + s + "' must look like name=value");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::vector<std::string> split_command(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

std::string text_of(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Settings from a JSON config file; command-line flags are applied afterwards.
void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file " + path + ": " + e.what());
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "data") s.data = v.get<std::string>();
    else if (key == "label_col") s.label_col = v.get<std::string>();
    else if (key == "method") s.method = v.get<std::string>();
    else if (key == "mode") s.mode = v.get<std::string>();
    else if (key == "agent") s.agent = v.get<std::string>();
    else if (key == "weights") s.weights = v.get<std::string>();
    else if (key == "max_iter") s.max_iter = v.get<std::size_t>();
    else if (key == "epsilon") s.epsilon = v.get<double>();
    else if (key == "patience") s.patience = v.get<std::size_t>();
    else if (key == "seed") s.seed = v.get<std::int64_t>();
    else if (key == "out") s.out = v.get<std::string>();
    else if (key == "k") s.k = v.get<std::size_t>();
    else if (key == "lof_k") s.lof_k = v.get<std::size_t>();
    else if (key == "max_points") s.max_points = v.get<std::size_t>();
    else if (key == "kmeans_k") s.kmeans_k = v.get<std::size_t>();
    else if (key == "backend_timeout") s.backend_timeout = v.get<double>();
    else if (key == "params") {
      for (const auto& [name, value] : v.items()) s.params.emplace_back(name, text_of(value));
    } else if (key == "backends") {
      for (const auto& [name, value] : v.items()) {
        if (value.is_array()) {
          std::string joined;
          for (const auto& part : value) joined += (joined.empty() ? "" : " ") + part.get<std::string>();
          s.backends.emplace_back(name, joined);
        } else {
          s.backends.emplace_back(name, value.get<std::string>());
        }
      }
    } else if (key == "llm") {
      for (const auto& [name, value] : v.items()) {
        if (name == "url") s.llm.base_url = value.get<std::string>();
        else if (name == "path") s.llm.path = value.get<std::string>();
        else if (name == "model") s.llm.model = value.get<std::string>();
        else if (name == "key_env") s.llm.api_key_env = value.get<std::string>();
        else if (name == "temperature") s.llm.temperature = value.get<double>();
        else if (name == "max_tokens") s.llm.max_tokens = value.get<int>();
        else if (name == "timeout") s.llm.timeout = std::chrono::seconds(value.get<long>());
        else if (name == "attach_plot") s.llm.attach_plot = value.get<bool>();
        else if (name == "system_prompt") s.llm.system_prompt = value.get<std::string>();
        else throw InputError("config file: unknown llm key '" + name + "'");
      }
    } else {
      throw InputError("config file: unknown key '" + key + "'");
    }
  }
}

struct Flags {
  std::string config;
  Settings s;
  std::vector<std::string> params, backends;
  double epsilon = 0.0;
  std::int64_t seed = 0;
  std::string llm_url, llm_path, llm_model, llm_key_env;
  double llm_temperature = 0.0;
  int llm_max_tokens = 0;
  long llm_timeout = 0;
  bool attach_plot = false;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* cmd, Flags& f) {
  f.opts["config"] = cmd->add_option("--config", f.config, "JSON file supplying any flag (flags win)");
  f.opts["data"] = cmd->add_option("--data", f.s.data, "input CSV with a header row");
  f.opts["label-col"] = cmd->add_option("--label-col", f.s.label_col, "label column name");
  f.opts["method"] = cmd->add_option("--method", f.s.method, "tsne, pca or external:NAME");
  f.opts["param"] = cmd->add_option("--param", f.params, "initial parameter, name=value (repeatable)");
  f.opts["backend"] =
      cmd->add_option("--backend", f.backends, "register an external backend, name=command (repeatable)");
  f.opts["backend-timeout"] =
      cmd->add_option("--backend-timeout", f.s.backend_timeout, "backend timeout in seconds");
  f.opts["seed"] = cmd->add_option("--seed", f.seed, "random seed for the method and k-means");
  f.opts["weights"] =
      cmd->add_option("--weights", f.s.weights, "gpt-5.2, claude-opus-4-5, gemini-3-pro-preview or a JSON file");
  f.opts["k"] = cmd->add_option("--k", f.s.k, "trustworthiness/continuity neighborhood size");
  f.opts["lof-k"] = cmd->add_option("--lof-k", f.s.lof_k, "LOF neighborhood size");
  f.opts["max-points"] = cmd->add_option("--max-points", f.s.max_points, "metric subsample cap");
  f.opts["kmeans-k"] = cmd->add_option("--kmeans-k", f.s.kmeans_k, "dendrogram leaves for unlabeled data");
}

Settings resolve(Flags& f) {
  Settings s;
  if (!f.config.empty()) apply_config_file(s, f.config);
  const Settings& c = f.s;
  if (f.given("data")) s.data = c.data;
  if (f.given("label-col")) s.label_col = c.label_col;
  if (f.given("method")) s.method = c.method;
  if (f.given("mode")) s.mode = c.mode;
  if (f.given("agent")) s.agent = c.agent;
  if (f.given("weights")) s.weights = c.weights;
  if (f.given("max-iter")) s.max_iter = c.max_iter;
  if (f.given("epsilon")) s.epsilon = f.epsilon;
  if (f.given("patience")) s.patience = c.patience;
  if (f.given("seed")) s.seed = f.seed;
  if (f.given("out")) s.out = c.out;
  if (f.given("k")) s.k = c.k;
  if (f.given("lof-k")) s.lof_k = c.lof_k;
  if (f.given("max-points")) s.max_points = c.max_points;
  if (f.given("kmeans-k")) s.kmeans_k = c.kmeans_k;
  if (f.given("backend-timeout")) s.backend_timeout = c.backend_timeout;
  for (const auto& p : f.params) s.params.push_back(split_assignment(p, "--param"));
  for (const auto& b : f.backends) s.backends.push_back(split_assignment(b, "--backend"));
  if (f.given("llm-url")) s.llm.base_url = f.llm_url;
  if (f.given("llm-path")) s.llm.path = f.llm_path;
  if (f.given("llm-model")) s.llm.model = f.llm_model;
  if (f.given("llm-key-env")) s.llm.api_key_env = f.llm_key_env;
  if (f.given("llm-temperature")) s.llm.temperature = f.llm_temperature;
  if (f.given("llm-max-tokens")) s.llm.max_tokens = f.llm_max_tokens;
  if (f.given("llm-timeout")) s.llm.timeout = std::chrono::seconds(f.llm_timeout);
  if (f.given("attach-plot")) s.llm.attach_plot = f.attach_plot;
  if (s.data.empty()) throw InputError("--data is required");
  return s;
}

// Method defaults, then parameters in order; a value outside the parameter's
// range is an error here rather than being clamped.
DRConfig initial_config(const Settings& s, const Dataset& data) {
  DRConfig config = DRConfig::for_method(s.method);
  config.fit_bounds_to_data(data.features.rows(), data.features.cols());
  for (const auto& note : config.clamp_to_bounds()) std::cerr << "note: default " << note << "\n";
  if (s.seed && config.allows("seed")) config.params["seed"] = *s.seed;
  for (const auto& [name, text] : s.params) {
    const auto resolved = config.resolve(name);
    if (!resolved) throw InputError("parameter '" + name + "' is not valid for method " + config.method);
    const CoercedValue v = coerce_parameter(config, *resolved, text);
    if (v.clamped) {
      const auto& b = config.bounds.at(*resolved);
      throw InputError(*resolved + "=" + text + " outside [" + format_exact(b.min) + ", " +
                       format_exact(b.max) + "] for this dataset");
    }
    config.params[*resolved] = v.value;
  }
  config.validate();
  return config;
}

BackendRegistry registry_of(const Settings& s) {
  BackendRegistry r;
  for (const auto& [name, cmd] : s.backends) r.add(name, split_command(cmd));
  return r;
}

ReportOptions report_options(const Settings& s) {
  ReportOptions o;
  o.k = s.k;
  o.lof_k = s.lof_k;
  o.max_points = s.max_points;
  o.seed = static_cast<std::uint64_t>(s.seed.value_or(0));
  return o;
}

int cmd_run(Flags& f) {
  const Settings s = resolve(f);
  if (s.out.empty()) throw InputError("--out is required");
  Dataset data = read_dataset(s.data, s.label_col);
  data.source = std::filesystem::absolute(s.data).lexically_normal().string();
  const DRConfig config = initial_config(s, data);
  const WeightVector weights = WeightVector::load(s.weights);
  const BackendRegistry registry = registry_of(s);

  PipelineOptions opt;
  opt.label_column = s.label_col;
  opt.mode = parse_score_mode(s.mode);
  opt.max_iterations = s.max_iter;
  opt.epsilon = s.epsilon;
  opt.patience = s.patience;
  opt.report = report_options(s);
  opt.kmeans_k = s.kmeans_k;
  opt.seed = static_cast<std::uint64_t>(s.seed.value_or(0));
  opt.registry = &registry;
  opt.backend.timeout = std::chrono::milliseconds(static_cast<long long>(s.backend_timeout * 1000));
  opt.out_dir = s.out;

  std::unique_ptr<Agent> agent;
  if (s.agent == "mock") {
    agent = std::make_unique<MockAgent>(weights);
  } else if (s.agent == "llm") {
    agent = std::make_unique<LlmAgent>(s.llm);
  } else {
    throw InputError("unknown agent '" + s.agent + "' (expected mock or llm)");
  }

  const Trajectory t = run_pipeline(data, config, *agent, weights, opt);
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    std::cout << "iteration " << r.iteration;
    if (r.evaluated) {
      std::cout << "  composite " << format_score(r.composite);
      if (r.quality_score()) std::cout << "  quality " << format_score(*r.quality_score());
    }
    if (!r.error.empty()) std::cout << "  error: " << r.error;
    std::cout << "\n";
  }
  std::cout << "stop reason: " << to_string(t.stop_reason) << "\n";
  if (t.best) {
    const auto& b = t.records[*t.best];
    std::cout << "best iteration: " << b.iteration << "\n";
    std::cout << "best parameters: " << parameters_block(b.config).dump() << "\n";
  }
  std::cout << "artifacts: " << s.out << "\n";
  return t.stop_reason == StopReason::Error ? 1 : 0;
}

int cmd_evaluate(Flags& f, const std::string& out_json, const std::string& svg) {
  const Settings s = resolve(f);
  Dataset data = read_dataset(s.data, s.label_col);
  const DRConfig config = initial_config(s, data);
  const WeightVector weights = WeightVector::load(s.weights);
  const BackendRegistry registry = registry_of(s);
  BackendOptions bopt;
  bopt.timeout = std::chrono::milliseconds(static_cast<long long>(s.backend_timeout * 1000));

  const PreparedInput input = prepare_input(data.features, config);
  const EmbeddingResult emb = embed_prepared(data.features, input, config, &registry, bopt);
  const MetricsReport report = assemble_report(input.data, emb.coordinates, data.labels, report_options(s));
  std::vector<std::string> notes;
  const double composite = explicit_composite_score(report, weights, &notes);

  json out = json::object();
  out["metrics"] = metrics_block(report);
  out["parameters"] = parameters_block(config);
  out["dimension"] = input.dimension;
  out["composite_score"] = format_score(composite);
  out["weights"] = weights.to_json();
  if (!notes.empty()) out["notes"] = notes;
  out["embedding_diagnostics"] = emb.diagnostics;
  const std::string text = out.dump(2) + "\n";
  if (out_json.empty()) {
    std::cout << text;
  } else {
    std::ofstream(out_json) << text;
  }
  if (!svg.empty()) std::ofstream(svg) << render_scatter(emb.coordinates, data.labels);
  return 0;
}

int cmd_replay(const std::string& dir, const std::string& out, bool no_recompute) {
  const ReplayReport r = replay_trajectory(dir, out.empty() ? std::nullopt
                                                            : std::optional<std::filesystem::path>(out),
                                           !no_recompute);
  std::cout << "compared " << r.compared << " prompt and SVG files\n";
  std::cout << "metrics re-derived from dataset: " << (r.recomputed ? "yes" : "no") << "\n";
  for (const auto& m : r.missing) std::cout << "missing: " << m << "\n";
  for (const auto& m : r.mismatched) std::cout << "differs: " << m << "\n";
  for (const auto& m : r.recompute_mismatches) std::cout << "recomputed value differs: " << m << "\n";
  std::cout << (r.ok() ? "replay identical" : "replay differs") << "\n";
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative tuning of dimensionality-reduction visualizations"};
  app.require_subcommand(1);

  Flags run_flags;
  auto* run = app.add_subcommand("run", "run the refinement loop");
  add_common(run, run_flags);
  run_flags.opts["mode"] = run->add_option("--mode", run_flags.s.mode, "implicit or explicit");
  run_flags.opts["agent"] = run->add_option("--agent", run_flags.s.agent, "mock or llm");
  run_flags.opts["max-iter"] = run->add_option("--max-iter", run_flags.s.max_iter, "iteration cap");
  run_flags.opts["epsilon"] = run->add_option("--epsilon", run_flags.epsilon, "convergence threshold");
  run_flags.opts["patience"] = run->add_option("--patience", run_flags.s.patience, "stable iterations to converge");
  run_flags.opts["out"] = run->add_option("--out", run_flags.s.out, "artifact directory");
  run_flags.opts["llm-url"] = run->add_option("--llm-url", run_flags.llm_url, "chat completion base URL");
  run_flags.opts["llm-path"] = run->add_option("--llm-path", run_flags.llm_path, "request path");
  run_flags.opts["llm-model"] = run->add_option("--llm-model", run_flags.llm_model, "model identifier");
  run_flags.opts["llm-key-env"] =
      run->add_option("--llm-key-env", run_flags.llm_key_env, "environment variable holding the API key");
  run_flags.opts["llm-temperature"] =
      run->add_option("--llm-temperature", run_flags.llm_temperature, "sampling temperature");
  run_flags.opts["llm-max-tokens"] =
      run->add_option("--llm-max-tokens", run_flags.llm_max_tokens, "response token limit");
  run_flags.opts["llm-timeout"] = run->add_option("--llm-timeout", run_flags.llm_timeout, "seconds");
  run_flags.opts["attach-plot"] =
      run->add_flag("--attach-plot", run_flags.attach_plot, "send the scatter plot to the model");

  Flags eval_flags;
  std::string eval_out, eval_svg;
  auto* evaluate = app.add_subcommand("evaluate", "embed once and print the metrics report");
  add_common(evaluate, eval_flags);
  evaluate->add_option("--out", eval_out, "write the report JSON here instead of stdout");
  evaluate->add_option("--svg", eval_svg, "also write the scatter plot");

  std::string replay_dir, replay_out;
  bool no_recompute = false;
  auto* replay = app.add_subcommand("replay", "re-render a stored trajectory and compare bytes");
  replay->add_option("dir", replay_dir, "trajectory directory")->required();
  replay->add_option("--out", replay_out, "write the regenerated artifacts here");
  replay->add_flag("--no-recompute", no_recompute, "use stored metrics instead of re-deriving them");

  BlobSpec blobs;
  std::string blobs_out;
  auto* make = app.add_subcommand("make-blobs", "write a Gaussian blob dataset");
  make->add_option("--n", blobs.n, "points");
  make->add_option("--dim", blobs.dim, "dimensions");
  make->add_option("--centers", blobs.centers, "clusters");
  make->add_option("--separation", blobs.separation, "center distance in sigmas");
  make->add_option("--seed", blobs.seed, "random seed");
  make->add_option("--out", blobs_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*evaluate) return cmd_evaluate(eval_flags, eval_out, eval_svg);
    if (*replay) return cmd_replay(replay_dir, replay_out, no_recompute);
    if (*make) {
      const Dataset d = make_blobs(blobs);
      write_dataset(blobs_out, d.features, d.labels, d.feature_names);
      return 0;
    }
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.backend_stderr().empty()) std::cerr << "backend stderr:\n" << e.backend_stderr() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
