#include <gtest/gtest.h>

#include "vistune/mock_agent.hpp"

using namespace vistune;

namespace {

MetricsReport report_with(double t) {
  MetricsReport r;
  r.trustworthiness = {t, 10};
  r.silhouette = 0.5;
  r.spearman = 0.5;
  r.stress = 0.3;
  r.lof.median = 1.05;
  return r;
}

MasterPrompt prompt_for(const DRConfig& c) {
  MasterPrompt p;
  p.hierarchy_hd = {"((A,B),C);", "20D (PCA)"};
  p.hierarchy_2d = {"((A,C),B);", "2D"};
  p.parameters = parameters_block(c);
  return p;
}

const WeightVector kWeights = WeightVector::preset("gpt-5.2");

}  // namespace

TEST(MockAgent, FirstStepGoesUpWithOneHighPriorityRecommendation) {
  const DRConfig c = DRConfig::tsne_baseline();
  const auto d = mock_agent_step(prompt_for(c), report_with(0.8), c, kWeights, {});
  ASSERT_EQ(d.report.recommendations.size(), 1u);
  const auto& rec = d.report.recommendations[0];
  EXPECT_EQ(rec.parameter, "tsne.perplexity");
  EXPECT_EQ(rec.priority, Priority::High);
  EXPECT_EQ(rec.current_value, "30.0");
  EXPECT_EQ(rec.suggested_value, "45.0");
  EXPECT_EQ(d.step.direction, +1);
  EXPECT_NEAR(d.report.quality_score, 10 * explicit_composite_score(report_with(0.8), kWeights), 1e-12);
  EXPECT_EQ(d.report.dendrogram_comparison.agreement_level, "moderate");
}

TEST(MockAgent, ReversesAfterWorseScore) {
  MockAgent agent(kWeights);
  DRConfig c = DRConfig::tsne_baseline();
  auto t1 = agent.step(prompt_for(c), report_with(0.8), c);
  c = apply_recommendations(c, t1.report).config;
  EXPECT_EQ(c.number("perplexity"), 45.0);
  auto t2 = agent.step(prompt_for(c), report_with(0.7), c);
  ASSERT_EQ(t2.report.recommendations.size(), 1u);
  EXPECT_EQ(t2.report.recommendations[0].parameter, "tsne.perplexity");
  EXPECT_EQ(t2.report.recommendations[0].suggested_value, "30.0");
  EXPECT_EQ(agent.history().back().direction, -1);
  EXPECT_TRUE(agent.history().back().reversed);
}

TEST(MockAgent, KeepsDirectionWhileImproving) {
  MockAgent agent(kWeights);
  DRConfig c = DRConfig::tsne_baseline();
  c = apply_recommendations(c, agent.step(prompt_for(c), report_with(0.5), c).report).config;
  const auto t = agent.step(prompt_for(c), report_with(0.7), c);
  EXPECT_EQ(t.report.recommendations[0].suggested_value, "67.5");
}

TEST(MockAgent, MovesToNextParameterAfterSecondWorsening) {
  MockAgent agent(kWeights);
  DRConfig c = DRConfig::tsne_baseline();
  c = apply_recommendations(c, agent.step(prompt_for(c), report_with(0.8), c).report).config;
  c = apply_recommendations(c, agent.step(prompt_for(c), report_with(0.7), c).report).config;
  const auto t = agent.step(prompt_for(c), report_with(0.6), c);
  ASSERT_EQ(t.report.recommendations.size(), 1u);
  EXPECT_EQ(t.report.recommendations[0].parameter, "tsne.learning_rate");
  EXPECT_EQ(t.report.recommendations[0].suggested_value, "300.0");
}

TEST(MockAgent, StationaryScoreStops) {
  MockAgent agent(kWeights);
  DRConfig c = DRConfig::tsne_baseline();
  for (int i = 0; i < 2; ++i) {
    const auto t = agent.step(prompt_for(c), report_with(0.8 + 0.001 * i), c);
    ASSERT_EQ(t.report.recommendations.size(), 1u);
    c = apply_recommendations(c, t.report).config;
  }
  const auto t = agent.step(prompt_for(c), report_with(0.8015), c);
  EXPECT_TRUE(t.report.recommendations.empty());
}

TEST(MockAgent, BoundedParameterReverses) {
  DRConfig c = DRConfig::tsne_baseline();
  c.params["perplexity"] = 100.0;
  const auto d = mock_agent_step(prompt_for(c), report_with(0.8), c, kWeights, {});
  ASSERT_EQ(d.report.recommendations.size(), 1u);
  EXPECT_DOUBLE_EQ(std::stod(d.report.recommendations[0].suggested_value), 100.0 / 1.5);
  EXPECT_EQ(d.step.direction, -1);
}

TEST(MockAgent, NoTunableParametersStops) {
  const DRConfig c = DRConfig::pca_default();
  const auto d = mock_agent_step(prompt_for(c), report_with(0.8), c, kWeights, {});
  EXPECT_TRUE(d.report.recommendations.empty());
}

TEST(MockAgent, OutputIsSchemaComplete) {
  MockAgent agent(kWeights);
  const DRConfig c = DRConfig::tsne_baseline();
  const auto t = agent.step(prompt_for(c), report_with(0.8), c);
  ASSERT_EQ(t.raw_responses.size(), 1u);
  const auto doc = nlohmann::json::parse(t.raw_responses[0]);
  for (const char* key : {"quality_score", "score_rationale", "overall_assessment", "dendrogram_comparison",
                          "visual_inspection", "recommendations", "follow_up_metrics"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(parse_diagnostic(t.raw_responses[0], &c), t.report);
}

TEST(MockAgent, Deterministic) {
  const DRConfig c = DRConfig::tsne_baseline();
  const auto a = mock_agent_step(prompt_for(c), report_with(0.8), c, kWeights, {});
  const auto b = mock_agent_step(prompt_for(c), report_with(0.8), c, kWeights, {});
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
}
