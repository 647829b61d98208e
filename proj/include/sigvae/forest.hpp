#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sigvae/knn.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/matrix.hpp"
#include "sigvae/rng.hpp"

namespace sigvae::classify {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  /// Candidate features per node; 0 means floor(sqrt(d)), at least 1.
  std::size_t max_features = 0;
  /// Draw n samples with replacement per tree; off uses every sample once.
  bool bootstrap = true;

  void validate() const;
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  /// Fraction of forged samples reaching this node.
  double p_forged = 0.0;
};

/// Binary CART tree; x[feature] <= threshold goes left.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  /// Training rows not drawn into this tree's bootstrap sample.
  std::vector<std::size_t> out_of_bag;

  double predict_forged(std::span<const double> x) const;
  std::size_t depth() const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;

  /// score = mean leaf forged-probability; label forged iff score >= 0.5.
  Prediction predict(std::span<const double> x) const;
  std::vector<Prediction> predict(const Matrix& x) const;
};

/// Gini impurity of a two-class node.
double gini(double n_forged, double n_total);

ForestModel rf_fit(const Matrix& features, const std::vector<Label>& labels,
                   const ForestConfig& cfg, const Rng& rng);

/// Out-of-bag predictions for the training rows; nullopt where a row was in
/// every tree's bootstrap sample.
std::vector<std::optional<Prediction>> oob_predict(const ForestModel& model,
                                                   const Matrix& features);

}  // namespace sigvae::classify
