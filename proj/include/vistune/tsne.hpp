#pragma once

// Exact t-SNE: O(n^2) affinities and gradient, no tree approximation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vistune/core.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/pca.hpp"

namespace vistune {

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t iteration)
      : Error("tsne: embedding became non-finite at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

struct TsneOptions {
  double perplexity = 30.0;
  double learning_rate = 200.0;
  std::size_t n_iter = 1000;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;  // capped at n_iter / 4
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  double init_std = 1e-4;
  double perplexity_tolerance = 1e-5;
  std::size_t max_bisection_steps = 50;
  std::size_t trace_every = 50;
};

struct TsneTracePoint {
  std::size_t iteration;
  double kl;
};

struct TsneResult {
  DataMatrix coordinates;
  double kl_after_exaggeration = 0.0;
  double final_kl = 0.0;
  std::size_t exaggeration_iters = 0;
  std::vector<TsneTracePoint> trace;
  double max_perplexity_error = 0.0;
};

/// Conditional distribution of one point over its neighbors.
struct PerplexityRow {
  std::vector<double> probabilities;  // self entry is 0
  double beta = 1.0;                  // 1 / (2 sigma^2)
  double perplexity = 0.0;            // exp(entropy) actually achieved
  std::size_t steps = 0;
};

/// Finds the Gaussian precision whose conditional distribution has the target
/// perplexity. `sq_distances` are squared distances from point `self`.
/// Stops when |achieved - target| < tolerance; the bracket is first expanded
/// geometrically, then bisected for at most `max_bisection_steps`.
inline PerplexityRow calibrate_perplexity(std::span<const double> sq_distances, std::size_t self,
                                          double target, double tolerance = 1e-5,
                                          std::size_t max_bisection_steps = 50) {
  const std::size_t n = sq_distances.size();
  PerplexityRow row;
  row.probabilities.assign(n, 0.0);
  double d_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != self) d_min = std::min(d_min, sq_distances[j]);
  }
  // Evaluates the distribution at precision beta; distances are shifted by
  // their minimum so the exponentials never all underflow.
  auto evaluate = [&](double beta) {
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == self) continue;
      const double shifted = sq_distances[j] - d_min;
      const double p = std::exp(-beta * shifted);
      row.probabilities[j] = p;
      sum += p;
      weighted += p * shifted;
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (double& p : row.probabilities) p /= sum;
    return std::exp(entropy);
  };

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double beta = 1.0;
  std::size_t bisections = 0;
  const std::size_t max_total = max_bisection_steps + 2100;  // expansion may span the double range
  for (std::size_t step = 0; step < max_total; ++step) {
    row.perplexity = evaluate(beta);
    row.beta = beta;
    row.steps = step + 1;
    const double diff = row.perplexity - target;
    if (std::abs(diff) < tolerance) break;
    if (diff > 0) {
      lo = beta;  // too flat: sharpen
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
    if (lo > 0.0 && std::isfinite(hi) && ++bisections > max_bisection_steps) break;
  }
  return row;
}

/// Symmetrized joint probabilities P (row-major n x n, sums to 1).
inline std::vector<double> joint_probabilities(const DataMatrix& x, const TsneOptions& opt,
                                               double* max_perplexity_error = nullptr) {
  const std::size_t n = x.rows();
  std::vector<double> sq(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = x(i, c) - x(j, c);
        s += diff * diff;
      }
      sq[i * n + j] = s;
      sq[j * n + i] = s;
    }
  }
  std::vector<double> cond(n * n, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = calibrate_perplexity({sq.data() + i * n, n}, i, opt.perplexity,
                                          opt.perplexity_tolerance, opt.max_bisection_steps);
    worst = std::max(worst, std::abs(row.perplexity - opt.perplexity));
    std::copy(row.probabilities.begin(), row.probabilities.end(), cond.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  if (max_perplexity_error) *max_perplexity_error = worst;
  std::vector<double> p(n * n, 0.0);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / norm;
    }
  }
  return p;
}

namespace detail {

inline double tsne_kl(const std::vector<double>& p, const DataMatrix& y) {
  const std::size_t n = y.rows();
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      const double q = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = q;
      z += 2.0 * q;
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double pij = p[i * n + j];
      if (pij > 0.0) {
        const double qij = std::max(num[i * n + j] / z, 1e-300);
        kl += 2.0 * pij * std::log(pij / qij);
      }
    }
  }
  return kl;
}

}  // namespace detail

/// Runs exact t-SNE on `x` (already reduced by the caller). Initialization is
/// PCA's first two components rescaled to standard deviation `init_std`, so the
/// result is a deterministic function of the input and options.
inline TsneResult tsne_embed(const DataMatrix& x, const TsneOptions& opt) {
  const std::size_t n = x.rows();
  if (!(opt.perplexity > 0.0) || 3.0 * opt.perplexity >= static_cast<double>(n)) {
    throw InputError("tsne: perplexity " + format_exact(opt.perplexity) +
                     " infeasible for n=" + std::to_string(n) + " (need 3 * perplexity < n)");
  }
  if (x.cols() < 2) throw InputError("tsne: input needs at least 2 columns");
  if (opt.n_iter == 0) throw InputError("tsne: n_iter must be positive");

  TsneResult result;
  std::vector<double> p = joint_probabilities(x, opt, &result.max_perplexity_error);
  for (double& v : p) v = std::max(v, 1e-12);

  DataMatrix y = pca(x, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (y(i, c) - mean) * (y(i, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double scale = sd > 0.0 ? opt.init_std / sd : 0.0;
    for (std::size_t i = 0; i < n; ++i) y(i, c) = (y(i, c) - mean) * scale;
  }

  const std::size_t exag_iters = std::min(opt.exaggeration_iters, opt.n_iter / 4);
  result.exaggeration_iters = exag_iters;
  std::vector<double> update(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2, 0.0);
  std::vector<double> num(n * n, 0.0);

  for (std::size_t iter = 0; iter < opt.n_iter; ++iter) {
    const double exag = iter < exag_iters ? opt.exaggeration : 1.0;
    const double momentum = iter < exag_iters ? opt.initial_momentum : opt.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = q;
        num[j * n + i] = q;
        z += 2.0 * q;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = num[i * n + j];
        const double mult = (exag * p[i * n + j] - q / z) * q;
        gx += mult * (y(i, 0) - y(j, 0));
        gy += mult * (y(i, 1) - y(j, 1));
      }
      grad[2 * i] = 4.0 * gx;
      grad[2 * i + 1] = 4.0 * gy;
    }
    for (std::size_t e = 0; e < n * 2; ++e) {
      const bool same_sign = (grad[e] > 0.0) == (update[e] > 0.0);
      gains[e] = same_sign ? std::max(gains[e] * 0.8, 0.01) : gains[e] + 0.2;
      update[e] = momentum * update[e] - opt.learning_rate * gains[e] * grad[e];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y(i, 0) += update[2 * i];
      y(i, 1) += update[2 * i + 1];
      mx += y(i, 0);
      my += y(i, 1);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, 0) -= mx;
      y(i, 1) -= my;
      if (!std::isfinite(y(i, 0)) || !std::isfinite(y(i, 1))) throw DivergenceError(iter + 1);
    }

    const std::size_t done = iter + 1;
    if (done == exag_iters) result.kl_after_exaggeration = detail::tsne_kl(p, y);
    if (opt.trace_every > 0 && (done % opt.trace_every == 0 || done == opt.n_iter)) {
      result.trace.push_back({done, detail::tsne_kl(p, y)});
    }
  }
  result.final_kl = result.trace.empty() ? detail::tsne_kl(p, y) : result.trace.back().kl;
  if (exag_iters == 0) result.kl_after_exaggeration = result.final_kl;
  result.coordinates = std::move(y);
  return result;
}

inline TsneOptions tsne_options_from(const DRConfig& config) {
  TsneOptions opt;
  opt.perplexity = config.number("perplexity");
  opt.learning_rate = config.number("learning_rate");
  const auto iters = config.integer("n_iter");
  if (iters <= 0) throw InputError("tsne: n_iter must be positive");
  opt.n_iter = static_cast<std::size_t>(iters);
  return opt;
}

}  // namespace vistune
