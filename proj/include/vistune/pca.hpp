#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vistune/core.hpp"

namespace vistune {

enum class PcaSolver { Full, Randomized };

inline PcaSolver parse_pca_solver(const std::string& name) {
  if (name == "full") return PcaSolver::Full;
  if (name == "randomized") return PcaSolver::Randomized;
  throw InputError("unknown PCA solver '" + name + "' (expected full or randomized)");
}

struct PcaFit {
  DataMatrix scores;                       // n x k projections
  Eigen::MatrixXd components;              // d x k, orthonormal columns
  std::vector<double> explained_variance;  // per component, ddof = 1
  std::vector<double> mean;                // column means
};

namespace detail {

inline Eigen::MatrixXd centered(const DataMatrix& m, std::vector<double>& mean) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  mean.assign(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mu = x.col(j).mean();
    mean[static_cast<std::size_t>(j)] = mu;
    x.col(j).array() -= mu;
  }
  return x;
}

// Halko-Martinsson-Tropp range finder with power iterations.
inline Eigen::MatrixXd randomized_right_vectors(const Eigen::MatrixXd& x, Eigen::Index k,
                                                std::uint64_t seed,
                                                Eigen::VectorXd& singular_values) {
  const Eigen::Index d = x.cols();
  const Eigen::Index width = std::min<Eigen::Index>(k + 10, std::min(x.rows(), d));
  std::mt19937_64 rng(seed);
  // Box-Muller on raw engine output keeps the draws identical across
  // standard library implementations.
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  Eigen::MatrixXd omega(d, width);
  for (Eigen::Index j = 0; j < width; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      omega(i, j) = std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * M_PI * uniform());
    }
  }
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(x * omega)
                          .householderQ() * Eigen::MatrixXd::Identity(x.rows(), width);
  for (int it = 0; it < 4; ++it) {
    Eigen::MatrixXd z = Eigen::HouseholderQR<Eigen::MatrixXd>(x.transpose() * q)
                            .householderQ() * Eigen::MatrixXd::Identity(d, width);
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(x * z).householderQ() *
        Eigen::MatrixXd::Identity(x.rows(), width);
  }
  Eigen::MatrixXd b = q.transpose() * x;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  singular_values = svd.singularValues().head(k);
  return svd.matrixV().leftCols(k);
}

}  // namespace detail

/// Principal component projection. Components are ordered by decreasing
/// variance and each is signed so its largest-magnitude loading is positive.
inline PcaFit pca_fit(const DataMatrix& matrix, std::size_t n_components,
                      PcaSolver solver = PcaSolver::Full, std::uint64_t seed = 0) {
  const std::size_t limit = std::min(matrix.rows(), matrix.cols());
  if (n_components == 0 || n_components > limit) {
    throw InputError("pca: n_components=" + std::to_string(n_components) +
                     " must be in [1, min(n, d)] = [1, " + std::to_string(limit) + "]");
  }
  if (auto bad = matrix.first_nonfinite_row()) {
    throw InputError("pca: non-finite value in row " + std::to_string(*bad));
  }
  PcaFit fit;
  const Eigen::MatrixXd x = detail::centered(matrix, fit.mean);
  const auto k = static_cast<Eigen::Index>(n_components);

  Eigen::VectorXd sv;
  if (solver == PcaSolver::Full) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    sv = svd.singularValues().head(k);
    fit.components = svd.matrixV().leftCols(k);
  } else {
    fit.components = detail::randomized_right_vectors(x, k, seed, sv);
  }

  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    fit.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (fit.components(arg, c) < 0.0) fit.components.col(c) *= -1.0;
  }

  const double dof = matrix.rows() > 1 ? static_cast<double>(matrix.rows() - 1) : 1.0;
  for (Eigen::Index c = 0; c < k; ++c) fit.explained_variance.push_back(sv(c) * sv(c) / dof);

  const Eigen::MatrixXd proj = x * fit.components;
  fit.scores = DataMatrix(matrix.rows(), n_components);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    for (std::size_t j = 0; j < n_components; ++j) {
      fit.scores(i, j) = proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return fit;
}

inline DataMatrix pca(const DataMatrix& matrix, std::size_t n_components,
                      PcaSolver solver = PcaSolver::Full, std::uint64_t seed = 0) {
  return pca_fit(matrix, n_components, solver, seed).scores;
}

}  // namespace vistune
