#pragma once

// Gaussian blob datasets for demos and tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "vistune/core.hpp"
#include "vistune/csv.hpp"

namespace vistune {

struct BlobSpec {
  std::size_t n = 300;        // total points, split as evenly as possible
  std::size_t dim = 50;
  std::size_t centers = 3;
  double separation = 20.0;   // distance between any two centers, in units of sigma
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters whose centers sit on scaled coordinate axes, so
/// every pair of centers is exactly separation*sigma apart. Labels "c0", "c1", ...
/// Points are interleaved by cluster (row i belongs to cluster i % centers).
inline Dataset make_blobs(const BlobSpec& spec) {
  if (spec.centers < 1 || spec.centers > spec.dim) {
    throw InputError("make_blobs: need 1 <= centers <= dim");
  }
  if (spec.n < spec.centers) throw InputError("make_blobs: fewer points than centers");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  const double offset = spec.separation * spec.sigma / std::sqrt(2.0);
  Dataset out;
  out.features = DataMatrix(spec.n, spec.dim);
  out.labels.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.centers;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      out.features(i, j) = noise(rng) + (j == c && spec.centers > 1 ? offset : 0.0);
    }
    out.labels.push_back("c" + std::to_string(c));
  }
  for (std::size_t j = 0; j < spec.dim; ++j) out.feature_names.push_back("x" + std::to_string(j));
  out.source = "blobs";
  return out;
}

}  // namespace vistune
