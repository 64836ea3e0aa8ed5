#include <gtest/gtest.h>

#include "vistune/embedding.hpp"
#include "vistune/synthetic.hpp"

using namespace vistune;

TEST(Embedding, PcaDispatch) {
  const Dataset d = make_blobs({.n = 40, .dim = 8, .centers = 2, .separation = 10, .sigma = 1, .seed = 1});
  const auto r = compute_embedding(d.features, DRConfig::pca_default());
  EXPECT_EQ(r.coordinates, pca(d.features, 2));
  EXPECT_EQ(r.config, DRConfig::pca_default());
}

TEST(Embedding, TsneInputIsPcaReduced) {
  const Dataset d = make_blobs({.n = 60, .dim = 30, .centers = 3, .separation = 20, .sigma = 1, .seed = 2});
  DRConfig c = DRConfig::tsne_baseline();
  c.params["perplexity"] = 10.0;
  c.params["n_iter"] = std::int64_t{300};
  const auto prepared = prepare_input(d.features, c);
  EXPECT_EQ(prepared.data.cols(), 20u);
  EXPECT_EQ(prepared.dimension, "20D (PCA)");
  const auto r = compute_embedding(d.features, c);
  EXPECT_EQ(r.diagnostics["input_dimension"], 20);
  EXPECT_TRUE(r.diagnostics.contains("final_kl"));
  EXPECT_EQ(r.diagnostics["exaggeration"], 12.0);
  EXPECT_EQ(r.coordinates.rows(), 60u);
  EXPECT_EQ(r.config, c);
}

TEST(Embedding, Deterministic) {
  const Dataset d = make_blobs({.n = 45, .dim = 12, .centers = 3, .separation = 20, .sigma = 1, .seed = 3});
  DRConfig c = DRConfig::tsne_baseline();
  c.params["perplexity"] = 8.0;
  c.params["n_iter"] = std::int64_t{250};
  c.params["n_pcs"] = std::int64_t{5};
  EXPECT_EQ(compute_embedding(d.features, c).coordinates, compute_embedding(d.features, c).coordinates);
}

TEST(Embedding, ExternalEchoSeesPreparedInput) {
  const Dataset d = make_blobs({.n = 20, .dim = 6, .centers = 2, .separation = 10, .sigma = 1, .seed = 4});
  BackendRegistry reg;
  reg.add("echo", {VISTUNE_ECHO_BACKEND});
  DRConfig c = DRConfig::for_method("external:echo");
  c.params["n_pcs"] = std::int64_t{3};
  const auto r = compute_embedding(d.features, c, &reg);
  const auto x = pca(d.features, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(r.coordinates(i, 0), x(i, 0));
    EXPECT_EQ(r.coordinates(i, 1), x(i, 1));
  }
}

TEST(Embedding, UnknownMethodListsRegistered) {
  BackendRegistry reg;
  reg.add("echo", {VISTUNE_ECHO_BACKEND});
  DRConfig c = DRConfig::pca_default();
  c.method = "isomap";
  try {
    compute_embedding(DataMatrix::from_rows({{1, 2}, {3, 4}, {5, 7}}), c, &reg);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("tsne, pca, external:{echo}"), std::string::npos) << e.what();
  }
}

TEST(Embedding, InvalidConfigRejected) {
  DRConfig c = DRConfig::tsne_baseline();
  c.params["perplexity"] = 1.0;
  EXPECT_THROW(compute_embedding(DataMatrix::from_rows({{1, 2}, {3, 4}, {5, 7}}), c), InputError);
}
