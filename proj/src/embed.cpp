#include "sigvae/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sigvae/kernels.hpp"

namespace sigvae::diagnostics {

namespace {

constexpr double kMinProb = 1e-12;
constexpr int kMaxBisection = 200;
constexpr int kMaxBackoff = 40;

// Student-t kernel values and their sum for the current embedding.
struct LowDim {
  Matrix num;
  double sum = 0.0;
};

LowDim student_t(const Matrix& y) {
  const std::size_t n = y.rows();
  LowDim q{Matrix(n, n), 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      q.num(i, j) = v;
      q.sum += v;
    }
  return q;
}

double kl_from(const Matrix& p, const LowDim& q) {
  double kl = 0.0;
  const std::size_t n = p.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      const double qij = std::max(q.num(i, j) / q.sum, kMinProb);
      kl += pij * std::log(pij / qij);
    }
  return kl;
}

}  // namespace

double row_affinities(std::span<const double> d, std::size_t self, double perplexity,
                      double tolerance, std::span<double> out) {
  const std::size_t n = d.size();
  double dmin = std::numeric_limits<double>::infinity(), dmean = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == self) continue;
    dmin = std::min(dmin, d[j]);
  }
  for (std::size_t j = 0; j < n; ++j)
    if (j != self) dmean += d[j] - dmin;
  dmean /= static_cast<double>(std::max<std::size_t>(1, n - 1));

  double beta = dmean > 0.0 ? 1.0 / dmean : 1.0;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double reached = 0.0;
  for (int it = 0; it < kMaxBisection; ++it) {
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == self) {
        out[j] = 0.0;
        continue;
      }
      const double shifted = d[j] - dmin;
      out[j] = std::exp(-beta * shifted);
      sum += out[j];
      weighted += shifted * out[j];
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    reached = std::exp(entropy);
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
    if (std::abs(reached - perplexity) < tolerance) break;
    if (reached > perplexity) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = (beta + lo) / 2.0;
    }
  }
  return reached;
}

double tsne_kl(const Matrix& p, const Matrix& embedding) {
  return kl_from(p, student_t(embedding));
}

TsneResult tsne_2d(const Matrix& points, const TsneConfig& cfg, Rng& rng) {
  const std::size_t n = points.rows();
  if (n < 2) throw std::invalid_argument("tsne_2d: need at least 2 points");
  if (n > 5000) throw std::invalid_argument("tsne_2d: exact t-SNE limited to 5000 points");
  if (!(cfg.perplexity > 0.0)) throw std::invalid_argument("tsne_2d: perplexity must be > 0");

  TsneResult result;
  result.effective_perplexity = cfg.perplexity;
  const double limit = std::max(1.0, static_cast<double>(n - 1) / 3.0);
  if (cfg.perplexity >= static_cast<double>(n) / 3.0 && cfg.perplexity > limit) {
    result.effective_perplexity = limit;
    result.warnings.push_back("perplexity " + std::to_string(cfg.perplexity) +
                              " too large for " + std::to_string(n) + " points; using " +
                              std::to_string(limit));
  }

  Matrix x = points;
  Matrix d = kernels::pairwise_sq_dists(x);
  bool duplicates = false;
  for (std::size_t i = 0; i < n && !duplicates; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (d(i, j) == 0.0) {
        duplicates = true;
        break;
      }
  if (duplicates) {
    result.warnings.push_back("duplicate points found; inputs jittered by 1e-9");
    for (double& v : x.data()) v += 1e-9 * rng.normal();
    d = kernels::pairwise_sq_dists(x);
  }

  // Symmetrized joint affinities.
  Matrix cond(n, n);
  result.row_perplexity.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    result.row_perplexity[i] = row_affinities(d.row(i), i, result.effective_perplexity,
                                              cfg.perplexity_tolerance, cond.row(i));
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n)), kMinProb);

  Matrix y(n, 2);
  for (double& v : y.data()) v = 1e-2 * rng.normal();
  Matrix velocity(n, 2), gains(n, 2, 1.0), grad(n, 2);

  auto gradient = [&](const Matrix& emb, double exaggeration, LowDim& q) {
    q = student_t(emb);
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (exaggeration * p(i, j) - q.num(i, j) / q.sum) * q.num(i, j);
        gx += w * (emb(i, 0) - emb(j, 0));
        gy += w * (emb(i, 1) - emb(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
  };

  auto center = [&](Matrix& emb) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += emb(i, 0);
      my += emb(i, 1);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      emb(i, 0) -= mx;
      emb(i, 1) -= my;
    }
  };

  LowDim q;
  double current_kl = std::numeric_limits<double>::infinity();
  double step_scale = 1.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const bool exaggerating = it < cfg.exaggeration_iters;
    const double momentum = exaggerating ? cfg.initial_momentum : cfg.final_momentum;
    gradient(y, exaggerating ? cfg.exaggeration : 1.0, q);
    if (it == cfg.exaggeration_iters) current_kl = kl_from(p, q);

    for (std::size_t k = 0; k < grad.size(); ++k) {
      const bool same_sign = (grad.data()[k] > 0.0) == (velocity.data()[k] > 0.0);
      gains.data()[k] = same_sign ? std::max(gains.data()[k] * 0.8, 0.01) : gains.data()[k] + 0.2;
    }

    if (exaggerating) {
      for (std::size_t k = 0; k < y.size(); ++k) {
        velocity.data()[k] = momentum * velocity.data()[k] -
                             cfg.learning_rate * gains.data()[k] * grad.data()[k];
        y.data()[k] += velocity.data()[k];
      }
      center(y);
      result.kl_history.push_back(kl_from(p, student_t(y)));
      continue;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < kMaxBackoff && !accepted; ++attempt) {
      Matrix v_try(n, 2), y_try = y;
      for (std::size_t k = 0; k < y.size(); ++k) {
        v_try.data()[k] = momentum * velocity.data()[k] -
                          step_scale * cfg.learning_rate * gains.data()[k] * grad.data()[k];
        y_try.data()[k] += v_try.data()[k];
      }
      center(y_try);
      const double kl = kl_from(p, student_t(y_try));
      if (kl <= current_kl) {
        y = std::move(y_try);
        velocity = std::move(v_try);
        current_kl = kl;
        step_scale = std::min(1.0, step_scale * 1.1);
        accepted = true;
      } else {
        step_scale *= 0.5;
        velocity = Matrix(n, 2);
        std::fill(gains.data().begin(), gains.data().end(), 1.0);
      }
    }
    result.kl_history.push_back(current_kl);
  }

  result.embedding = std::move(y);
  return result;
}

PcaResult pca_2d(const Matrix& points) {
  const std::size_t n = points.rows(), dims = points.cols();
  if (n < 2) throw std::invalid_argument("pca_2d: need at least 2 points");
  PcaResult r;
  r.embedding = Matrix(n, 2);
  r.components = Matrix(2, dims);

  Matrix centered = points;
  for (std::size_t c = 0; c < dims; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += points(i, c);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered(i, c) -= mean;
  }
  Matrix cov = kernels::matmul_tn(centered, centered);
  for (double& v : cov.data()) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < dims; ++c) r.total_variance += cov(c, c);
  if (r.total_variance <= 0.0) return r;

  const double negligible = 1e-13 * r.total_variance;
  std::vector<std::vector<double>> found;
  for (std::size_t comp = 0; comp < 2 && comp < dims; ++comp) {
    // Deterministic start that is not orthogonal to typical axes.
    std::vector<double> v(dims);
    for (std::size_t c = 0; c < dims; ++c) v[c] = 1.0 + 0.01 * static_cast<double>(c);
    auto orthonormalize = [&](std::vector<double>& u) {
      for (const auto& f : found) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dims; ++c) dot += u[c] * f[c];
        for (std::size_t c = 0; c < dims; ++c) u[c] -= dot * f[c];
      }
      double norm = 0.0;
      for (double e : u) norm += e * e;
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (double& e : u) e /= norm;
      return norm;
    };
    orthonormalize(v);

    double lambda = 0.0;
    bool vanished = false;
    std::vector<double> w(dims);
    for (int it = 0; it < 20000; ++it) {
      for (std::size_t a = 0; a < dims; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dims; ++b) s += cov(a, b) * v[b];
        w[a] = s;
      }
      const double norm = orthonormalize(w);
      if (norm <= negligible) {
        vanished = true;
        break;
      }
      double change = 0.0;
      for (std::size_t c = 0; c < dims; ++c) change = std::max(change, std::abs(w[c] - v[c]));
      v = w;
      lambda = norm;
      if (change < 1e-13) break;
    }
    if (vanished) break;

    std::size_t lead = 0;
    for (std::size_t c = 1; c < dims; ++c)
      if (std::abs(v[c]) > std::abs(v[lead])) lead = c;
    if (v[lead] < 0.0)
      for (double& e : v) e = -e;

    r.eigenvalues[comp] = lambda;
    for (std::size_t c = 0; c < dims; ++c) r.components(comp, c) = v[c];
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < dims; ++c) s += centered(i, c) * v[c];
      r.embedding(i, comp) = s;
    }
    found.push_back(std::move(v));
  }
  return r;
}

}  // namespace sigvae::diagnostics
