#pragma once
// Independent reference computations used by the tests. Nothing here calls
// into the library's numeric paths beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "sigvae/image.hpp"
#include "sigvae/matrix.hpp"

namespace oracle {

inline sigvae::Matrix matmul(const sigvae::Matrix& a, const sigvae::Matrix& b) {
  sigvae::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const sigvae::Matrix& a, const sigvae::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// Bilinear read with every coordinate clamped to the image, computed from
/// the four neighbours by explicit weights.
inline double bilinear_clamped(const sigvae::GrayImage& img, double x, double y) {
  const double w = static_cast<double>(img.width() - 1), h = static_cast<double>(img.height() - 1);
  x = std::min(std::max(x, 0.0), w);
  y = std::min(std::max(y, 0.0), h);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, static_cast<int>(w)), y1 = std::min(y0 + 1, static_cast<int>(h));
  const double ax = x - x0, ay = y - y0;
  const auto at = [&](int px, int py) { return img.at(static_cast<std::size_t>(px), static_cast<std::size_t>(py)); };
  return at(x0, y0) * (1 - ax) * (1 - ay) + at(x1, y0) * ax * (1 - ay) + at(x0, y1) * (1 - ax) * ay +
         at(x1, y1) * ax * ay;
}

inline sigvae::GrayImage resize(const sigvae::GrayImage& img, std::size_t target) {
  sigvae::GrayImage out(target, target);
  for (std::size_t y = 0; y < target; ++y)
    for (std::size_t x = 0; x < target; ++x) {
      const double sx = (x + 0.5) * img.width() / static_cast<double>(target) - 0.5;
      const double sy = (y + 0.5) * img.height() / static_cast<double>(target) - 0.5;
      out.at(x, y) = bilinear_clamped(img, sx, sy);
    }
  return out;
}

/// Otsu by direct evaluation of the between-class variance at every split.
inline int otsu_bin(const std::vector<double>& pixels) {
  std::vector<int> bins;
  for (double v : pixels) bins.push_back(static_cast<int>(std::lround(v * 255.0)));
  double best = 0.0;
  int best_t = 0;
  for (int t = 1; t < 256; ++t) {
    std::vector<int> lo, hi;
    for (int b : bins) (b < t ? lo : hi).push_back(b);
    if (lo.empty() || hi.empty()) continue;
    double m0 = 0, m1 = 0;
    for (int b : lo) m0 += b;
    for (int b : hi) m1 += b;
    m0 /= lo.size();
    m1 /= hi.size();
    const double p0 = static_cast<double>(lo.size()) / bins.size(), p1 = 1.0 - p0;
    const double between = p0 * p1 * (m0 - m1) * (m0 - m1);
    if (between > best * (1 + 1e-12)) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

/// Indices of the k nearest rows by full sort on (distance, index).
inline std::vector<std::size_t> knn(const sigvae::Matrix& train, const std::vector<double>& q,
                                    std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < train.cols(); ++c) s += (train(i, c) - q[c]) * (train(i, c) - q[c]);
    d.emplace_back(s, i);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double weighted_gini = std::numeric_limits<double>::infinity();
};

/// Best Gini split over every feature and every midpoint, honouring min_leaf.
inline Split best_split(const sigvae::Matrix& x, const std::vector<int>& y, std::size_t min_leaf) {
  Split best;
  const auto gini = [](double pos, double n) {
    if (n == 0) return 0.0;
    const double p = pos / n;
    return 1.0 - p * p - (1 - p) * (1 - p);
  };
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < x.rows(); ++i) vals.push_back(x(i, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
      const double thr = (vals[v] + vals[v + 1]) / 2;
      double nl = 0, pl = 0, nr = 0, pr = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        if (x(i, f) <= thr) {
          ++nl;
          pl += y[i];
        } else {
          ++nr;
          pr += y[i];
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double g = (nl * gini(pl, nl) + nr * gini(pr, nr)) / (nl + nr);
      if (g < best.weighted_gini - 1e-15) best = {f, thr, g};
    }
  }
  return best;
}

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix
/// by cyclic Jacobi rotations.
inline std::pair<std::vector<double>, sigvae::Matrix> jacobi_eigen(sigvae::Matrix a) {
  const std::size_t n = a.rows();
  sigvae::Matrix v = sigvae::Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  std::vector<double> vals;
  sigvae::Matrix vecs(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    vals.push_back(a(order[c], order[c]));
    for (std::size_t r = 0; r < n; ++r) vecs(r, c) = v(r, order[c]);
  }
  return {vals, vecs};
}

/// Mean silhouette coefficient of a labelled 2-D embedding.
inline double silhouette(const sigvae::Matrix& y, const std::vector<int>& labels) {
  const std::size_t n = y.rows();
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) d += (y(i, c) - y(j, c)) * (y(i, c) - y(j, c));
      sum[labels[j]] += std::sqrt(d);
      ++cnt[labels[j]];
    }
    const double a = cnt[labels[i]] ? sum[labels[i]] / cnt[labels[i]] : 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != labels[i] && cnt[c]) b = std::min(b, sum[c] / cnt[c]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace oracle
