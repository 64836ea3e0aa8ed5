#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "vistune/metrics.hpp"
#include "vistune/synthetic.hpp"
#include "vistune/tsne.hpp"

using namespace vistune;

namespace {

std::vector<double> squared_row(const oracle::Mat& x, std::size_t i) {
  std::vector<double> out;
  for (const auto& r : x) {
    double s = 0;
    for (std::size_t c = 0; c < r.size(); ++c) s += (r[c] - x[i][c]) * (r[c] - x[i][c]);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Perplexity, CalibratesRandomRow) {
  std::mt19937_64 rng(1);
  const auto x = oracle::random_points(50, 4, rng);
  const auto sq = squared_row(x, 7);
  const PerplexityRow row = calibrate_perplexity(sq, 7, 10.0);
  EXPECT_LT(std::abs(row.perplexity - 10.0), 1e-5);
  EXPECT_EQ(row.probabilities[7], 0.0);
  // Independent entropy of the returned distribution.
  double h = 0, sum = 0;
  for (double p : row.probabilities) {
    sum += p;
    if (p > 0) h -= p * std::log(p);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(std::exp(h), 10.0, 1e-5);
}

TEST(Perplexity, FarApartScalesStillConverge) {
  std::vector<double> sq = {0, 1e-6, 2e-6, 3e-6, 1e6, 2e6, 3e6, 4e6, 5e6, 6e6};
  const PerplexityRow row = calibrate_perplexity(sq, 0, 3.0);
  EXPECT_LT(std::abs(row.perplexity - 3.0), 1e-5);
}

TEST(JointProbabilities, SymmetricNormalizedAndCalibrated) {
  std::mt19937_64 rng(2);
  const auto x = DataMatrix::from_rows(oracle::random_points(40, 5, rng));
  TsneOptions opt;
  opt.perplexity = 8;
  double worst = 1;
  const auto p = joint_probabilities(x, opt, &worst);
  EXPECT_LT(worst, 1e-5);
  double sum = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(p[i * 40 + i], 0.0);
    for (std::size_t j = 0; j < 40; ++j) {
      EXPECT_GE(p[i * 40 + j], 0.0);
      EXPECT_EQ(p[i * 40 + j], p[j * 40 + i]);
      sum += p[i * 40 + j];
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Tsne, SeparatesBlobsAndKlDecreases) {
  const Dataset d = make_blobs({.n = 60, .dim = 10, .centers = 3, .separation = 20, .sigma = 1, .seed = 3});
  TsneOptions opt;
  opt.perplexity = 10;
  const TsneResult r = tsne_embed(d.features, opt);
  EXPECT_LE(r.final_kl, r.kl_after_exaggeration);
  EXPECT_EQ(r.exaggeration_iters, 250u);
  EXPECT_EQ(r.trace.back().iteration, 1000u);
  EXPECT_GT(*silhouette(r.coordinates, d.labels), 0.5);
  EXPECT_FALSE(r.coordinates.first_nonfinite_row().has_value());
}

TEST(Tsne, BitwiseDeterministic) {
  const Dataset d = make_blobs({.n = 45, .dim = 6, .centers = 3, .separation = 10, .sigma = 1, .seed = 4});
  TsneOptions opt;
  opt.perplexity = 5;
  opt.n_iter = 300;
  EXPECT_EQ(tsne_embed(d.features, opt).coordinates, tsne_embed(d.features, opt).coordinates);
}

TEST(Tsne, ExaggerationCappedAtQuarter) {
  const Dataset d = make_blobs({.n = 30, .dim = 4, .centers = 2, .separation = 10, .sigma = 1, .seed = 5});
  TsneOptions opt;
  opt.perplexity = 5;
  opt.n_iter = 400;
  EXPECT_EQ(tsne_embed(d.features, opt).exaggeration_iters, 100u);
}

TEST(Tsne, RejectsInfeasiblePerplexity) {
  const Dataset d = make_blobs({.n = 30, .dim = 4, .centers = 2, .separation = 10, .sigma = 1, .seed = 5});
  TsneOptions opt;
  opt.perplexity = 10;
  EXPECT_THROW(tsne_embed(d.features, opt), InputError);
}

TEST(Tsne, DivergenceReportsIteration) {
  const Dataset d = make_blobs({.n = 30, .dim = 4, .centers = 2, .separation = 10, .sigma = 1, .seed = 6});
  TsneOptions opt;
  opt.perplexity = 5;
  opt.learning_rate = 1e300;
  opt.n_iter = 50;
  try {
    tsne_embed(d.features, opt);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.iteration(), 1u);
    EXPECT_LE(e.iteration(), 50u);
  }
}
