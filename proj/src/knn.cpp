#include "sigvae/knn.hpp"

#include <algorithm>
#include <numeric>

#include "sigvae/kernels.hpp"

namespace sigvae::classify {

KnnModel::KnnModel(Matrix features, std::vector<Label> labels, std::size_t k)
    : features_(std::move(features)), labels_(std::move(labels)), k_(k) {
  if (labels_.empty()) throw std::invalid_argument("knn: empty training set");
  if (features_.rows() != labels_.size())
    throw ShapeError("knn: feature rows and label count differ");
  if (k_ < 1 || k_ > labels_.size())
    throw std::invalid_argument("knn: k must lie in [1, training size]");
}

std::vector<std::size_t> KnnModel::neighbours(std::span<const double> x) const {
  if (x.size() != features_.cols()) throw ShapeError("knn: query dimension mismatch");
  std::vector<double> d(labels_.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double diff = x[c] - features_(i, c);
      s += diff * diff;
    }
    d[i] = s;
  }
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_), idx.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  idx.resize(k_);
  return idx;
}

Prediction KnnModel::vote(std::span<const double> d) const {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_), idx.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  std::size_t forged = 0;
  for (std::size_t i = 0; i < k_; ++i) forged += labels_[idx[i]] == Label::forged ? 1 : 0;
  Prediction p;
  p.score = static_cast<double>(forged) / static_cast<double>(k_);
  p.label = 2 * forged >= k_ ? Label::forged : Label::genuine;
  return p;
}

Prediction KnnModel::predict(std::span<const double> x) const {
  if (x.size() != features_.cols()) throw ShapeError("knn: query dimension mismatch");
  Matrix q(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix d = kernels::cross_sq_dists(q, features_);
  return vote(d.row(0));
}

std::vector<Prediction> KnnModel::predict(const Matrix& queries) const {
  if (queries.cols() != features_.cols()) throw ShapeError("knn: query dimension mismatch");
  const Matrix d = kernels::cross_sq_dists(queries, features_);
  std::vector<Prediction> out(queries.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vote(d.row(i));
  return out;
}

KnnModel knn_fit(const Matrix& features, const std::vector<Label>& labels, std::size_t k) {
  return KnnModel(features, labels, k);
}

}  // namespace sigvae::classify
