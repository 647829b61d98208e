#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sigvae/matrix.hpp"
#include "sigvae/rng.hpp"

namespace sigvae::diagnostics {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  /// Bandwidth search stops once |perplexity(row) - target| is below this.
  double perplexity_tolerance = 1e-4;
};

struct TsneResult {
  Matrix embedding;  // n x 2
  /// KL(P || Q) after every iteration (exaggeration removed).
  std::vector<double> kl_history;
  /// Perplexity actually reached for every row.
  std::vector<double> row_perplexity;
  double effective_perplexity = 0.0;
  std::vector<std::string> warnings;
};

/// Gaussian conditional affinities for one row of squared distances, with
/// the bandwidth bisected to hit `perplexity`. Returns the reached perplexity.
double row_affinities(std::span<const double> sq_dists, std::size_t self, double perplexity,
                      double tolerance, std::span<double> out);

/// Exact O(n^2) t-SNE to two dimensions. After the exaggeration phase a step
/// that would raise KL(P || Q) is retried at half size with momentum reset,
/// so the recorded KL never increases there.
TsneResult tsne_2d(const Matrix& points, const TsneConfig& cfg, Rng& rng);

/// KL(P || Q) of an embedding against symmetric affinities P.
double tsne_kl(const Matrix& p, const Matrix& embedding);

struct PcaResult {
  Matrix embedding;  // n x 2
  Matrix components; // 2 x d, rows are unit principal axes (zero rows when absent)
  double eigenvalues[2] = {0.0, 0.0};
  double total_variance = 0.0;
};

/// Projection onto the top two principal axes found by power iteration with
/// deflation. Each axis is signed so its largest-magnitude loading is positive.
PcaResult pca_2d(const Matrix& points);

}  // namespace sigvae::diagnostics
