#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sigvae/manifest.hpp"
#include "sigvae/matrix.hpp"

namespace sigvae::classify {

struct Prediction {
  Label label = Label::genuine;
  /// Estimated probability of the forged class.
  double score = 0.0;
};

/// Brute-force k-nearest-neighbour classifier over stored feature rows.
class KnnModel {
 public:
  KnnModel(Matrix features, std::vector<Label> labels, std::size_t k);

  /// Majority vote of the k nearest rows (Euclidean). Distance ties go to
  /// the lower row index; vote ties go to forged.
  Prediction predict(std::span<const double> x) const;
  /// Batch prediction through the parallel distance kernel.
  std::vector<Prediction> predict(const Matrix& queries) const;

  /// Indices of the k nearest training rows, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> x) const;

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  Prediction vote(std::span<const double> sq_dists) const;

  Matrix features_;
  std::vector<Label> labels_;
  std::size_t k_;
};

KnnModel knn_fit(const Matrix& features, const std::vector<Label>& labels, std::size_t k = 5);

}  // namespace sigvae::classify
