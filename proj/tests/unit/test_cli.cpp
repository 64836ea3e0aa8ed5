#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vistune/process.hpp"

namespace fs = std::filesystem;
using namespace vistune;
using namespace std::chrono_literals;

namespace {

ProcessResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), VISTUNE_CLI);
  return run_process(args, "", 120s);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("vistune_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    data = (dir / "blobs.csv").string();
    const auto r = cli({"make-blobs", "--n", "90", "--dim", "8", "--centers", "3", "--seed", "4", "--out", data});
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path dir;
  std::string data;
};

}  // namespace

TEST_F(CliTest, MakeBlobsWritesHeaderAndRows) {
  std::ifstream in(data);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x0,x1,x2,x3,x4,x5,x6,x7,label");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
    ++rows;
  }
  EXPECT_EQ(rows, 90u);
  // Same seed, same bytes.
  const auto again = (dir / "again.csv").string();
  ASSERT_EQ(cli({"make-blobs", "--n", "90", "--dim", "8", "--centers", "3", "--seed", "4", "--out", again}).exit_code, 0);
  EXPECT_EQ(slurp(data), slurp(again));
}

TEST_F(CliTest, RunWithMockAgentThenReplay) {
  const auto out = (dir / "run").string();
  const auto r = cli({"run", "--data", data, "--method", "tsne", "--param", "perplexity=10", "--param",
                      "n_iter=300", "--agent", "mock", "--max-iter", "4", "--out", out});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("iteration 1  composite "), std::string::npos);
  EXPECT_NE(r.out.find("stop reason: "), std::string::npos);
  EXPECT_NE(r.out.find("best iteration: "), std::string::npos);
  EXPECT_NE(r.out.find("\"perplexity\""), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(out) / "run.json"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "iter_1_prompt.json"));
  // Defaults that do not fit a 90 x 8 dataset are reported on stderr.
  EXPECT_NE(r.err.find("n_pcs"), std::string::npos);

  const auto rep = cli({"replay", out});
  EXPECT_EQ(rep.exit_code, 0) << rep.out << rep.err;
  EXPECT_NE(rep.out.find("replay identical"), std::string::npos);

  std::ofstream(fs::path(out) / "iter_2_prompt.json", std::ios::app) << " ";
  const auto bad = cli({"replay", out, "--no-recompute"});
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.out.find("replay differs"), std::string::npos);
}

TEST_F(CliTest, EvaluatePrintsReport) {
  const auto svg = (dir / "plot.svg").string();
  const auto r = cli({"evaluate", "--data", data, "--method", "pca", "--svg", svg});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("composite_score"));
  EXPECT_TRUE(j.contains("metrics"));
  EXPECT_EQ(j.at("dimension"), "8D");
  EXPECT_NE(slurp(svg).find("<svg xmlns"), std::string::npos);

  const auto file = (dir / "report.json").string();
  ASSERT_EQ(cli({"evaluate", "--data", data, "--method", "pca", "--out", file}).exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(file)), j);
}

TEST_F(CliTest, OutOfRangeParameterIsRejected) {
  const auto r = cli({"run", "--data", data, "--param", "perplexity=500", "--out", (dir / "x").string()});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("perplexity"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "x" / "run.json"));
}

TEST_F(CliTest, BadInputsExitWithTwo) {
  EXPECT_EQ(cli({"run", "--data", (dir / "missing.csv").string()}).exit_code, 2);
  EXPECT_EQ(cli({"run", "--data", data, "--method", "umap"}).exit_code, 2);
  EXPECT_EQ(cli({"run", "--data", data, "--param", "perplexity"}).exit_code, 2);
  EXPECT_EQ(cli({"run", "--data", data, "--weights", "no-such-preset"}).exit_code, 2);
  EXPECT_EQ(cli({"replay", (dir / "nothing").string()}).exit_code, 2);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const auto cfg = (dir / "cfg.json").string();
  std::ofstream(cfg) << nlohmann::json{{"data", data},
                                       {"method", "tsne"},
                                       {"agent", "mock"},
                                       {"max_iter", 5},
                                       {"params", {{"perplexity", 8}, {"n_iter", 300}}},
                                       {"out", (dir / "from_config").string()}}
                            .dump();
  const auto out = (dir / "from_flag").string();
  const auto r = cli({"run", "--config", cfg, "--max-iter", "2", "--out", out});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(fs::path(out) / "run.json"));
  EXPECT_FALSE(fs::exists(dir / "from_config"));
  EXPECT_NE(r.out.find("iteration 2"), std::string::npos);
  EXPECT_EQ(r.out.find("iteration 3"), std::string::npos);
  const auto run = nlohmann::json::parse(slurp(fs::path(out) / "run.json"));
  EXPECT_NE(run.dump().find("\"perplexity\""), std::string::npos);

  std::ofstream(cfg) << R"({"unknown_key": 1})";
  EXPECT_EQ(cli({"run", "--config", cfg}).exit_code, 2);
}

TEST_F(CliTest, ExternalBackendFromFlag) {
  const auto out = (dir / "ext").string();
  const auto r = cli({"run", "--data", data, "--method", "external:echo", "--backend",
                      std::string("echo=") + VISTUNE_ECHO_BACKEND, "--agent", "mock", "--max-iter", "1", "--out",
                      out});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("stop reason: max_iterations"), std::string::npos);
}
