#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigvae/forest.hpp"
#include "sigvae/knn.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/metrics.hpp"
#include "sigvae/vae.hpp"

namespace sigvae::classify {

enum class FeatureMode { latent, recon, both };

std::string_view to_string(FeatureMode mode);
std::optional<FeatureMode> parse_feature_mode(std::string_view text);
std::size_t feature_width(FeatureMode mode, std::size_t latent_dim);

/// Standardization of the reconstruction-error column.
struct ReconScale {
  double mean = 0.0;
  double sd = 1.0;
};

/// Mean and population standard deviation; sd falls back to 1 when zero.
ReconScale fit_recon_scale(const std::vector<double>& errors);

/// Raw per-image features: encoder means and reconstruction errors.
struct RawFeatures {
  Matrix mu;
  std::vector<double> recon;
};

RawFeatures raw_features(const vae::VaeParams& params, const Matrix& images);

/// latent -> mu; recon -> raw error; both -> mu followed by the scaled error.
Matrix assemble_features(const RawFeatures& raw, FeatureMode mode, const ReconScale& scale,
                         const std::vector<std::size_t>& rows);

struct FeatureSet {
  Matrix features;
  std::vector<Label> labels;
};

/// Features for every manifest row; for `both` the error column is
/// standardized over the rows supplied here.
FeatureSet extract_features(const vae::VaeParams& params, const Manifest& manifest,
                            FeatureMode mode, const vae::ImageLoader& loader);

struct ProtocolConfig {
  vae::VaeConfig vae;
  std::vector<FeatureMode> modes = {FeatureMode::latent, FeatureMode::recon, FeatureMode::both};
  std::size_t knn_k = 5;
  ForestConfig forest;
  double genuine_train_fraction = 0.7;
  double classifier_train_fraction = 0.5;
  std::uint64_t split_seed = 0;

  void validate() const;
};

struct ClassifierResult {
  FeatureMode mode = FeatureMode::latent;
  std::string classifier;  // "knn" or "rf"
  EvalReport report;
};

struct IdentityResult {
  std::string identity;
  std::size_t vae_train_size = 0;
  std::size_t classifier_train_size = 0;
  std::size_t test_size = 0;
  std::vector<ClassifierResult> results;
};

struct MacroAverage {
  FeatureMode mode = FeatureMode::latent;
  std::string classifier;
  double accuracy = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Mean over identities whose AUC is defined.
  std::optional<double> auc;
  std::size_t identities = 0;
};

struct ProtocolReport {
  std::vector<IdentityResult> identities;
  std::vector<MacroAverage> macro;
  std::vector<std::string> warnings;

  const MacroAverage* find_macro(FeatureMode mode, std::string_view classifier) const;
};

/// Per identity: train a one-class VAE on a split of its genuine images,
/// featurize the held-out genuine images plus its forgeries, then fit and
/// score kNN and random forest on a stratified split. Identities with fewer
/// than 4 genuine images (or no forgeries) are skipped with a warning.
ProtocolReport run_protocol(const Manifest& manifest, const ProtocolConfig& cfg,
                            const vae::ImageLoader& loader);

std::vector<MacroAverage> macro_average(const std::vector<IdentityResult>& identities,
                                        const std::vector<FeatureMode>& modes);

}  // namespace sigvae::classify
