#include <gtest/gtest.h>

#include "support/reference_texts.hpp"
#include "vistune/pca.hpp"
#include "vistune/prompt.hpp"
#include "vistune/synthetic.hpp"

using namespace vistune;

namespace {

MasterPrompt blob_prompt(std::uint64_t seed) {
  const Dataset d = make_blobs({.n = 60, .dim = 5, .centers = 3, .separation = 10, .sigma = 1, .seed = seed});
  const auto ld = pca(d.features, 2);
  const MetricsReport r = assemble_report(d.features, ld, d.labels);
  const auto hd_c = label_centroids(d.features, d.labels);
  const auto ld_c = label_centroids(ld, d.labels);
  return build_master_prompt(r, upgma(pairwise_distances(hd_c.points), hd_c.names), "5D",
                             upgma(pairwise_distances(ld_c.points), ld_c.names), DRConfig::tsne_baseline(), 1);
}

}  // namespace

TEST(MasterPrompt, TopLevelKeysExactly) {
  const auto doc = nlohmann::json::parse(blob_prompt(1).dump());
  std::vector<std::string> keys;
  const auto ordered = nlohmann::ordered_json::parse(blob_prompt(1).dump());
  for (const auto& [k, _] : ordered.items()) keys.push_back(k);
  EXPECT_EQ(keys, std::vector<std::string>(std::begin(reference::kPromptKeys), std::end(reference::kPromptKeys)));
  EXPECT_EQ(doc["hierarchy_2d"]["dimension"], "2D");
  EXPECT_EQ(doc["hierarchy_hd"]["dimension"], "5D");
  EXPECT_EQ(doc["parameters"]["method"], "tsne");
  EXPECT_EQ(doc["parameters"]["perplexity"], 30.0);
  EXPECT_EQ(doc["label_summary"]["c0"], 20);
}

TEST(MasterPrompt, FourDecimalStrings) {
  const auto doc = nlohmann::json::parse(blob_prompt(2).dump());
  const std::string s = doc["metrics"]["Global Structure & HD<->2D Correlation"]["Spearman Correlation"];
  ASSERT_EQ(s.size(), 6u);
  EXPECT_EQ(s[1], '.');
  const std::string t = doc["metrics"]["Neighborhood Preservation"]["Trustworthiness (k=10)"];
  EXPECT_EQ(t.size() - t.find('.') - 1, 4u);
}

TEST(MasterPrompt, NewickVerbatimAndDeterministic) {
  const MasterPrompt a = blob_prompt(3), b = blob_prompt(3);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.hierarchy_hd.newick.back(), ';');
  const auto doc = nlohmann::json::parse(a.dump());
  EXPECT_EQ(doc["hierarchy_hd"]["newick"], a.hierarchy_hd.newick);
  EXPECT_EQ(a.dump().back(), '\n');
}
