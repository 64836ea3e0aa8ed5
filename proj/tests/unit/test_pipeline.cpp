#include <gtest/gtest.h>

#include <sys/stat.h>

#include <filesystem>
#include <fstream>

#include "vistune/mock_agent.hpp"
#include "vistune/pipeline.hpp"
#include "vistune/synthetic.hpp"

using namespace vistune;
namespace fs = std::filesystem;

namespace {

// Replies with a fixed sequence of reports, repeating the last one.
class ScriptedAgent : public Agent {
 public:
  explicit ScriptedAgent(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  AgentTurn step(const MasterPrompt& prompt, const MetricsReport&, const DRConfig& config) override {
    prompts.push_back(prompt.dump());
    const std::string& raw = replies_[std::min(calls_++, replies_.size() - 1)];
    return {parse_diagnostic(raw, &config), {raw}};
  }
  std::string name() const override { return "scripted"; }
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
  std::size_t calls_ = 0;
};

class FailingAgent : public Agent {
 public:
  AgentTurn step(const MasterPrompt&, const MetricsReport&, const DRConfig&) override {
    throw AgentError("agent failed after 3 attempts: bad", "last garbage",
                     {{1, "parse", "first garbage", "bad"}, {2, "parse", "last garbage", "bad"}});
  }
  std::string name() const override { return "failing"; }
};

std::string reply(double score, const std::vector<std::pair<std::string, std::string>>& recs,
                  const std::string& follow_up = "") {
  nlohmann::json j = {{"quality_score", score}, {"recommendations", nlohmann::json::array()}};
  for (const auto& [p, v] : recs) j["recommendations"].push_back({{"parameter", p}, {"suggested_value", v}, {"priority", "high"}});
  if (!follow_up.empty()) j["follow_up_metrics"] = {follow_up};
  return j.dump();
}

Dataset small_blobs() {
  return make_blobs({.n = 90, .dim = 10, .centers = 3, .separation = 20, .sigma = 1, .seed = 11});
}

DRConfig fast_tsne() {
  DRConfig c = DRConfig::tsne_baseline();
  c.params["perplexity"] = 10.0;
  c.params["n_iter"] = std::int64_t{300};
  c.params["n_pcs"] = std::int64_t{5};
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("vistune_pipeline_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

const WeightVector kWeights = WeightVector::preset("gpt-5.2");

}  // namespace

TEST(Convergence, Examples) {
  EXPECT_EQ(check_convergence({7.0, 7.0, 7.0}, 0.05, 2, false), StopReason::Converged);
  EXPECT_EQ(check_convergence({7.0, 7.0}, 0.05, 2, false), StopReason::None);
  EXPECT_EQ(check_convergence({6.0, 7.0, 8.0}, 0.05, 2, false), StopReason::None);
  EXPECT_EQ(check_convergence({6.0, 7.0, 8.0, 1.0}, 0.05, 2, true), StopReason::AgentEmptyRecommendations);
  EXPECT_EQ(check_convergence({0.5, 0.503, 0.506}, 0.005, 2, false), StopReason::Converged);
  EXPECT_EQ(default_epsilon(ScoreMode::Implicit), 0.05);
  EXPECT_EQ(default_epsilon(ScoreMode::Explicit), 0.005);
}

TEST(FollowUp, ParsesKnownMetricsOnly) {
  const auto r = parse_follow_up_requests(
      {"Trustworthiness at k=30", "continuity (k: 5) and trustworthiness k 30", "LOF at k=50", "geodesic stress"});
  EXPECT_EQ(r, (std::vector<std::pair<std::string, std::size_t>>{{"Trustworthiness", 30}, {"Continuity", 5}}));
}

TEST(Pipeline, MaxIterationsOne) {
  MockAgent agent(kWeights);
  PipelineOptions opt;
  opt.max_iterations = 1;
  const Trajectory t = run_pipeline(small_blobs(), fast_tsne(), agent, kWeights, opt);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.stop_reason, StopReason::MaxIterations);
  EXPECT_EQ(t.best, 0u);
  EXPECT_EQ(t.records[0].iteration, 1u);
}

TEST(Pipeline, CaseStudyConfigUpdate) {
  const Dataset d = make_blobs({.n = 250, .dim = 60, .centers = 3, .separation = 20, .sigma = 1, .seed = 12});
  DRConfig start = DRConfig::tsne_baseline();
  start.params["n_iter"] = std::int64_t{250};
  start.params["perplexity"] = 30.0;
  ScriptedAgent agent({reply(6.0, {{"tsne.perplexity", "80"},
                                   {"tsne.learning_rate", "800"},
                                   {"tsne.n_iter", "3000"},
                                   {"tsne.n_pcs", "50"}}),
                       reply(7.0, {})});
  PipelineOptions opt;
  opt.max_iterations = 2;
  const Trajectory t = run_pipeline(d, start, agent, kWeights, opt);
  ASSERT_EQ(t.records.size(), 2u);
  const DRConfig& c2 = t.records[1].config;
  EXPECT_EQ(c2.number("perplexity"), 80.0);
  EXPECT_EQ(c2.number("learning_rate"), 800.0);
  EXPECT_EQ(c2.integer("n_iter"), 3000);
  EXPECT_EQ(c2.integer("n_pcs"), 50);
  EXPECT_EQ(t.records[1].hd_dimension, "50D (PCA)");
  EXPECT_EQ(t.stop_reason, StopReason::AgentEmptyRecommendations);
}

TEST(Pipeline, MockLoopTerminatesAndChainsConfigs) {
  MockAgent agent(kWeights);
  DRConfig start = fast_tsne();
  start.params["perplexity"] = 5.0;
  const Trajectory t = run_pipeline(small_blobs(), start, agent, kWeights, {});
  EXPECT_LE(t.records.size(), 10u);
  EXPECT_TRUE(t.stop_reason == StopReason::Converged || t.stop_reason == StopReason::AgentEmptyRecommendations ||
              t.stop_reason == StopReason::MaxIterations);
  for (std::size_t i = 0; i + 1 < t.records.size(); ++i) {
    EXPECT_EQ(t.records[i].iteration, i + 1);
    DRConfig expected = apply_recommendations(t.records[i].config, *t.records[i].diagnostic).config;
    EXPECT_EQ(t.records[i + 1].config, expected);
  }
  ASSERT_TRUE(t.best.has_value());
  for (std::size_t i = 0; i < t.records.size(); ++i) EXPECT_LE(t.records[i].composite, t.records[*t.best].composite);
}

TEST(Pipeline, BestIsEarliestArgmax) {
  Trajectory t;
  t.mode = ScoreMode::Implicit;
  for (double s : {5.0, 7.0, 7.0, 6.0}) {
    IterationRecord r;
    r.evaluated = true;
    r.diagnostic = DiagnosticReport{};
    r.diagnostic->quality_score = s;
    t.records.push_back(r);
  }
  t.update_best();
  EXPECT_EQ(t.best, 1u);
}

TEST(Pipeline, FollowUpMetricsComputedNextIteration) {
  ScriptedAgent agent({reply(5.0, {{"tsne.perplexity", "12"}}, "trustworthiness at k=20"), reply(5.0, {})});
  const Trajectory t = run_pipeline(small_blobs(), fast_tsne(), agent, kWeights, {});
  ASSERT_EQ(t.records.size(), 2u);
  ASSERT_EQ(t.records[1].metrics.follow_up.size(), 1u);
  EXPECT_EQ(t.records[1].metrics.follow_up[0].second.k, 20u);
  EXPECT_NE(agent.prompts[1].find("Trustworthiness (k=20)"), std::string::npos);
}

TEST(Pipeline, AgentFailureArchivesRawText) {
  FailingAgent agent;
  const auto dir = fresh_dir("agent_fail");
  PipelineOptions opt;
  opt.out_dir = dir;
  const Trajectory t = run_pipeline(small_blobs(), fast_tsne(), agent, kWeights, opt);
  EXPECT_EQ(t.stop_reason, StopReason::Error);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.records[0].raw_responses, (std::vector<std::string>{"first garbage", "last garbage"}));
  EXPECT_EQ(slurp(dir / "iter_1_raw_2.txt"), "last garbage");
  EXPECT_TRUE(fs::exists(dir / "iter_1_prompt.json"));
  fs::remove_all(dir);
}

TEST(Pipeline, EmbeddingFailureKeepsPartialTrajectory) {
  BackendRegistry reg;
  reg.add("echo", {VISTUNE_ECHO_BACKEND, "--fail"});
  MockAgent agent(kWeights);
  PipelineOptions opt;
  opt.registry = &reg;
  const Trajectory t = run_pipeline(small_blobs(), DRConfig::for_method("external:echo"), agent, kWeights, opt);
  EXPECT_EQ(t.stop_reason, StopReason::Error);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_FALSE(t.records[0].evaluated);
  EXPECT_NE(t.error.find("status 3"), std::string::npos) << t.error;
}

TEST(Pipeline, UnlabeledDataUsesKMeansLeaves) {
  Dataset d = small_blobs();
  d.labels.clear();
  MockAgent agent(kWeights);
  PipelineOptions opt;
  opt.max_iterations = 1;
  opt.kmeans_k = 4;
  const Trajectory t = run_pipeline(d, fast_tsne(), agent, kWeights, opt);
  ASSERT_TRUE(t.records[0].evaluated);
  EXPECT_EQ(t.records[0].tree_labels, "kmeans");
  EXPECT_EQ(t.records[0].tree_hd.leaf_count(), 4u);
  EXPECT_FALSE(t.records[0].metrics.silhouette.has_value());
  EXPECT_EQ(t.records[0].notes.size(), 1u);
}

class ExportTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_dir_ = fresh_dir("data");
    fs::create_directories(data_dir_);
    const Dataset d = small_blobs();
    write_dataset(data_dir_ / "blobs.csv", d.features, d.labels);
    Dataset loaded = read_dataset(data_dir_ / "blobs.csv");
    ScriptedAgent agent({reply(5.0, {{"tsne.perplexity", "12"}}), reply(6.0, {{"tsne.perplexity", "14"}}),
                         reply(6.5, {{"tsne.perplexity", "16"}})});
    PipelineOptions opt;
    opt.max_iterations = 3;
    traj_ = new Trajectory(run_pipeline(loaded, fast_tsne(), agent, kWeights, opt));
  }
  static void TearDownTestSuite() {
    delete traj_;
    fs::remove_all(data_dir_);
  }
  static inline fs::path data_dir_;
  static inline Trajectory* traj_ = nullptr;
};

TEST_F(ExportTest, MetricsCsvShape) {
  ASSERT_EQ(traj_->records.size(), 3u);
  EXPECT_EQ(traj_->stop_reason, StopReason::MaxIterations);
  const auto dir = fresh_dir("csv");
  export_trajectory(*traj_, dir);
  std::ifstream in(dir / "metrics.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0],
            "iteration,Spearman Correlation,Stress-1,Mean Distance Ratio,Trustworthiness,Continuity,"
            "Silhouette Score,LOF Median,LOF Outliers,composite_score,quality_score");
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(std::count(lines[i].begin(), lines[i].end(), ','), 10) << lines[i];
    EXPECT_EQ(lines[i].substr(0, 2), std::to_string(i) + ",");
  }
  fs::remove_all(dir);
}

TEST_F(ExportTest, ReexportIsByteIdentical) {
  const auto dir = fresh_dir("idem");
  export_trajectory(*traj_, dir);
  const auto first = dir_bytes(dir);
  export_trajectory(*traj_, dir);
  EXPECT_EQ(dir_bytes(dir), first);
  const auto dir2 = fresh_dir("idem2");
  export_trajectory(load_trajectory(dir), dir2);
  EXPECT_EQ(dir_bytes(dir2), first);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_F(ExportTest, ManifestReferencesEveryFile) {
  const auto dir = fresh_dir("manifest");
  export_trajectory(*traj_, dir);
  const auto m = nlohmann::json::parse(slurp(dir / "run.json"));
  std::set<std::string> referenced{"run.json", m["metrics_csv"].get<std::string>()};
  for (const auto& it : m["iterations"]) {
    for (const auto& [key, v] : it["artifacts"].items()) {
      if (v.is_array()) {
        for (const auto& f : v) referenced.insert(f.get<std::string>());
      } else {
        referenced.insert(v.get<std::string>());
      }
    }
  }
  std::set<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(dir)) on_disk.insert(e.path().filename().string());
  EXPECT_EQ(referenced, on_disk);
  EXPECT_EQ(m["stop_reason"], "max_iterations");
  EXPECT_EQ(m["iterations"].size(), 3u);
  fs::remove_all(dir);
}

TEST_F(ExportTest, UnwritableDirectoryFailsBeforeWriting) {
  const auto base = fresh_dir("blocked");
  fs::create_directories(base);
  std::ofstream(base / "file") << "x";
  EXPECT_THROW(export_trajectory(*traj_, base / "file" / "out"), InputError);
  if (::geteuid() != 0) {
    fs::create_directories(base / "ro");
    fs::permissions(base / "ro", fs::perms::owner_read | fs::perms::owner_exec);
    EXPECT_THROW(export_trajectory(*traj_, base / "ro"), InputError);
    EXPECT_TRUE(fs::is_empty(base / "ro"));
    fs::permissions(base / "ro", fs::perms::owner_all);
  }
  fs::remove_all(base);
}

TEST_F(ExportTest, ReplayReproducesPromptsAndSvgs) {
  const auto dir = fresh_dir("replay");
  export_trajectory(*traj_, dir);
  const auto rep = replay_trajectory(dir);
  EXPECT_TRUE(rep.recomputed);
  EXPECT_EQ(rep.compared, 3u * 4u);
  EXPECT_TRUE(rep.ok()) << rep.mismatched.size() << " " << rep.recompute_mismatches.size();

  // A tampered prompt is detected.
  std::ofstream(dir / "iter_2_prompt.json") << "{}";
  const auto bad = replay_trajectory(dir, std::nullopt, false);
  EXPECT_EQ(bad.mismatched, (std::vector<std::string>{"iter_2_prompt.json"}));
  fs::remove(dir / "iter_3_scatter.svg");
  EXPECT_EQ(replay_trajectory(dir, std::nullopt, false).missing, (std::vector<std::string>{"iter_3_scatter.svg"}));
  fs::remove_all(dir);
}

TEST_F(ExportTest, CheckpointingWritesDuringRun) {
  const auto dir = fresh_dir("ckpt");
  ScriptedAgent agent({reply(5.0, {{"tsne.perplexity", "12"}}), reply(6.0, {})});
  PipelineOptions opt;
  opt.out_dir = dir;
  const Trajectory t = run_pipeline(read_dataset(data_dir_ / "blobs.csv"), fast_tsne(), agent, kWeights, opt);
  EXPECT_EQ(t.records.size(), 2u);
  EXPECT_TRUE(replay_trajectory(dir).ok());
  const auto m = nlohmann::json::parse(slurp(dir / "run.json"));
  EXPECT_EQ(m["stop_reason"], "agent_empty_recommendations");
  fs::remove_all(dir);
}

TEST(Pipeline, InitialValuesFittedToSmallData) {
  MockAgent agent(kWeights);
  PipelineOptions opt;
  opt.max_iterations = 1;
  const Trajectory t = run_pipeline(small_blobs(), DRConfig::tsne_baseline(), agent, kWeights, opt);
  ASSERT_TRUE(t.records[0].evaluated) << t.error;
  EXPECT_EQ(t.records[0].config.integer("n_pcs"), 10);
  EXPECT_NEAR(t.records[0].config.number("perplexity"), 29.99, 1e-12);
  EXPECT_EQ(t.records[0].notes.size(), 2u);
}
