#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sigvae/image.hpp"
#include "sigvae/matrix.hpp"
#include "sigvae/vae.hpp"

namespace sigvae::diagnostics {

inline constexpr double kCollapseThreshold = 0.01;

struct CollapseReport {
  /// Dataset mean of each latent dimension's KL term (nats).
  std::vector<double> per_dim_kl;
  std::vector<std::size_t> collapsed_dims;
  double threshold = kCollapseThreshold;
  /// kl / (kl + recon) per epoch, unweighted kl.
  std::vector<double> kl_fraction_by_epoch;
  /// beta_effective * kl / (beta_effective * kl + recon) per epoch.
  std::vector<double> weighted_kl_fraction_by_epoch;
};

/// Per-dimension KL of q(z|x) against N(0, I), averaged over the rows of data.
CollapseReport collapse_report(const vae::VaeParams& params, const Matrix& data,
                               const std::vector<vae::LossBreakdown>& history,
                               double threshold = kCollapseThreshold);

std::string collapse_report_json(const CollapseReport& report);

struct TraversalGrid {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<GrayImage> images;
};

/// Decodes z with z[dim] swept over linspace(lo, hi, steps) and every other
/// coordinate held at 0.
TraversalGrid latent_traversal(const vae::VaeParams& params, std::size_t dim, double lo,
                               double hi, std::size_t steps = 9);

/// Horizontal strip of the grid's images separated by 1-pixel white gutters.
GrayImage montage(const TraversalGrid& grid);

struct BetaSweepEntry {
  double beta = 1.0;
  vae::TrainResult model;
  std::vector<TraversalGrid> grids;  // one per latent dimension
  CollapseReport collapse;
};

inline const std::vector<double> kDefaultBetas = {1.0, 1.25, 1.5, 1.75, 2.0, 5.0};

/// Trains one model per beta on the same data and seed, then traverses every
/// latent dimension over [lo, hi].
std::vector<BetaSweepEntry> beta_sweep(const Matrix& data, const vae::VaeConfig& base,
                                       const std::vector<double>& betas, double lo = -4.0,
                                       double hi = 4.0, std::size_t steps = 9);

/// Stacked-area geometry of a loss history: reconstruction at the bottom,
/// beta-weighted KL on top. One column per epoch.
struct StackedArea {
  double width = 0.0;
  double height = 0.0;
  /// Closed polygons in SVG coordinates (y grows downward).
  std::vector<std::pair<double, double>> recon_polygon;
  std::vector<std::pair<double, double>> kl_polygon;
  /// Data units per pixel on the y axis.
  double y_scale = 1.0;
};

StackedArea loss_breakdown_geometry(const std::vector<vae::LossBreakdown>& history,
                                    double width = 640.0, double height = 360.0);
std::string loss_breakdown_svg(const std::vector<vae::LossBreakdown>& history);

}  // namespace sigvae::diagnostics
