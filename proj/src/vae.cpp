#include "sigvae/vae.hpp"

#include <algorithm>
#include <cmath>

#include "sigvae/pnm.hpp"

namespace sigvae::vae {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Stream ids under the config seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;

constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
    "enc_w1", "enc_b1", "mu_w", "mu_b", "logvar_w", "logvar_b",
    "dec_w1", "dec_b1", "dec_w2", "dec_b2"};

std::array<std::pair<std::size_t, std::size_t>, kBlockCount> block_shapes(const VaeConfig& c) {
  const auto d = c.input_dim, h = c.intermediate_dim, l = c.latent_dim;
  return {{{d, h}, {1, h}, {h, l}, {1, l}, {h, l}, {1, l}, {l, h}, {1, h}, {h, d}, {1, d}}};
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  add_row_broadcast(out, b);
  return out;
}

Matrix clamp_logvar(const Matrix& raw) {
  Matrix out = raw;
  for (double& v : out.data()) v = std::clamp(v, kLogvarMin, kLogvarMax);
  return out;
}

void require_cols(const Matrix& m, std::size_t cols, const char* what) {
  if (m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                     shape_string(m));
  }
}

Matrix row_matrix(std::span<const double> v) {
  return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

// Forward pass intermediates kept for backward.
struct Forward {
  Matrix a1, h1, mu, logvar_raw, logvar, sigma, z, a2, h2, y;
};

Forward forward(const VaeParams& p, const Matrix& x, const Matrix& eps) {
  Forward f;
  f.a1 = affine(x, p[Block::enc_w1], p[Block::enc_b1]);
  f.h1 = relu(f.a1);
  f.mu = affine(f.h1, p[Block::mu_w], p[Block::mu_b]);
  f.logvar_raw = affine(f.h1, p[Block::logvar_w], p[Block::logvar_b]);
  f.logvar = clamp_logvar(f.logvar_raw);
  f.sigma = Matrix(f.logvar.rows(), f.logvar.cols());
  for (std::size_t i = 0; i < f.sigma.size(); ++i) f.sigma.data()[i] = std::exp(f.logvar.data()[i] / 2.0);
  f.z = reparameterize(f.mu, f.logvar, eps);
  f.a2 = affine(f.z, p[Block::dec_w1], p[Block::dec_b1]);
  f.h2 = relu(f.a2);
  f.y = sigmoid(affine(f.h2, p[Block::dec_w2], p[Block::dec_b2]));
  return f;
}

void mask_by_positive(Matrix& grad, const Matrix& pre_activation) {
  auto g = grad.data();
  auto a = pre_activation.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(a[i] > 0.0)) g[i] = 0.0;
  }
}

}  // namespace

void VaeConfig::validate() const {
  if (input_dim < 1 || intermediate_dim < 1 || latent_dim < 1)
    throw std::invalid_argument("vae dimensions must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("vae.beta must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("vae.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("vae.learning_rate must be > 0");
  if (anneal.kind == Anneal::Kind::linear && anneal.ramp_epochs < 1)
    throw std::invalid_argument("vae.anneal ramp_epochs must be >= 1");
}

std::string_view block_name(Block b) { return kBlockNames[static_cast<std::size_t>(b)]; }
std::string_view block_name(std::size_t index) { return kBlockNames.at(index); }

bool VaeParams::all_finite() const {
  return std::all_of(weights.begin(), weights.end(), [](const Matrix& m) { return m.all_finite(); });
}

VaeParams zero_params(const VaeConfig& cfg) {
  cfg.validate();
  VaeParams p;
  p.config = cfg;
  const auto shapes = block_shapes(cfg);
  for (std::size_t i = 0; i < kBlockCount; ++i) {
    p.weights[i] = Matrix(shapes[i].first, shapes[i].second);
    p.adam_m[i] = Matrix(shapes[i].first, shapes[i].second);
    p.adam_v[i] = Matrix(shapes[i].first, shapes[i].second);
  }
  return p;
}

VaeParams init_params(const VaeConfig& cfg, Rng& rng) {
  VaeParams p = zero_params(cfg);
  for (std::size_t i = 0; i < kBlockCount; i += 2) {  // even indices are weight matrices
    Matrix& w = p.weights[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
  }
  return p;
}

Encoded encode(const VaeParams& params, const Matrix& x) {
  require_cols(x, params.config.input_dim, "encode");
  const Matrix h = relu(affine(x, params[Block::enc_w1], params[Block::enc_b1]));
  return {affine(h, params[Block::mu_w], params[Block::mu_b]),
          clamp_logvar(affine(h, params[Block::logvar_w], params[Block::logvar_b]))};
}

std::pair<std::vector<double>, std::vector<double>> encode(const VaeParams& params,
                                                           std::span<const double> x) {
  Encoded e = encode(params, row_matrix(x));
  return {e.mu.values(), e.logvar.values()};
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size())
    throw ShapeError("reparameterize: length mismatch");
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(logvar[i] / 2.0) * eps[i];
  return z;
}

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols())
    throw ShapeError("reparameterize: shape mismatch");
  Matrix z(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data()[i] = mu.data()[i] + std::exp(logvar.data()[i] / 2.0) * eps.data()[i];
  return z;
}

Matrix decode(const VaeParams& params, const Matrix& z) {
  require_cols(z, params.config.latent_dim, "decode");
  const Matrix h = relu(affine(z, params[Block::dec_w1], params[Block::dec_b1]));
  return sigmoid(affine(h, params[Block::dec_w2], params[Block::dec_b2]));
}

std::vector<double> decode(const VaeParams& params, std::span<const double> z) {
  return decode(params, row_matrix(z)).values();
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ShapeError("kl_divergence: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
  return -0.5 * s;
}

std::vector<double> kl_per_dim(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ShapeError("kl_per_dim: length mismatch");
  std::vector<double> out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    out[i] = -0.5 * (1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]));
  return out;
}

LossBreakdown loss(std::span<const double> x, const LatentCode& code,
                   std::span<const double> x_hat, double beta_effective) {
  if (x.size() != x_hat.size()) throw ShapeError("loss: x and x_hat lengths differ");
  LossBreakdown out;
  for (std::size_t i = 0; i < x.size(); ++i) out.recon += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
  out.kl = kl_divergence(code.mu, code.logvar);
  out.beta_effective = beta_effective;
  out.total = out.recon + beta_effective * out.kl;
  return out;
}

BackwardResult backward(const VaeParams& p, const Matrix& batch, const Matrix& eps,
                        double beta_effective) {
  const VaeConfig& cfg = p.config;
  require_cols(batch, cfg.input_dim, "backward batch");
  require_cols(eps, cfg.latent_dim, "backward eps");
  if (batch.rows() != eps.rows() || batch.rows() == 0)
    throw ShapeError("backward: batch and eps row counts differ or are zero");

  const Forward f = forward(p, batch, eps);
  const std::size_t n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  BackwardResult out;
  out.loss.beta_effective = beta_effective;
  for (std::size_t r = 0; r < n; ++r) {
    double recon = 0.0;
    for (std::size_t c = 0; c < cfg.input_dim; ++c) {
      const double d = batch(r, c) - f.y(r, c);
      recon += d * d;
    }
    out.loss.recon += recon;
    out.loss.kl += kl_divergence(f.mu.row(r), f.logvar.row(r));
  }
  out.loss.recon *= inv_n;
  out.loss.kl *= inv_n;
  out.loss.total = out.loss.recon + beta_effective * out.loss.kl;

  // Decoder output layer.
  Matrix d_a3(n, cfg.input_dim);
  for (std::size_t i = 0; i < d_a3.size(); ++i) {
    const double y = f.y.data()[i];
    d_a3.data()[i] = 2.0 * (y - batch.data()[i]) * inv_n * y * (1.0 - y);
  }
  Gradients& g = out.grads;
  g[Block::dec_w2] = matmul_tn(f.h2, d_a3);
  g[Block::dec_b2] = column_sums(d_a3);

  Matrix d_a2 = matmul_nt(d_a3, p[Block::dec_w2]);
  mask_by_positive(d_a2, f.a2);
  g[Block::dec_w1] = matmul_tn(f.z, d_a2);
  g[Block::dec_b1] = column_sums(d_a2);

  // Through the reparameterization; eps is a constant.
  const Matrix d_z = matmul_nt(d_a2, p[Block::dec_w1]);
  Matrix d_mu(n, cfg.latent_dim), d_lv(n, cfg.latent_dim);
  for (std::size_t i = 0; i < d_z.size(); ++i) {
    const double mu = f.mu.data()[i];
    const double lv = f.logvar.data()[i];
    const double raw = f.logvar_raw.data()[i];
    d_mu.data()[i] = d_z.data()[i] + beta_effective * mu * inv_n;
    const double through_z = d_z.data()[i] * eps.data()[i] * 0.5 * f.sigma.data()[i];
    const double through_kl = beta_effective * 0.5 * (std::exp(lv) - 1.0) * inv_n;
    d_lv.data()[i] = (raw > kLogvarMin && raw < kLogvarMax) ? through_z + through_kl : 0.0;
  }
  g[Block::mu_w] = matmul_tn(f.h1, d_mu);
  g[Block::mu_b] = column_sums(d_mu);
  g[Block::logvar_w] = matmul_tn(f.h1, d_lv);
  g[Block::logvar_b] = column_sums(d_lv);

  Matrix d_a1 = add(matmul_nt(d_mu, p[Block::mu_w]), matmul_nt(d_lv, p[Block::logvar_w]));
  mask_by_positive(d_a1, f.a1);
  g[Block::enc_w1] = matmul_tn(batch, d_a1);
  g[Block::enc_b1] = column_sums(d_a1);
  return out;
}

BackwardResult backward_reference(const VaeParams& p, const Matrix& batch, const Matrix& eps,
                                  double beta) {
  const VaeConfig& cfg = p.config;
  const std::size_t D = cfg.input_dim, H = cfg.intermediate_dim, L = cfg.latent_dim;
  require_cols(batch, D, "backward_reference batch");
  require_cols(eps, L, "backward_reference eps");
  const std::size_t n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  BackwardResult out;
  out.loss.beta_effective = beta;
  for (std::size_t b = 0; b < kBlockCount; ++b)
    out.grads.blocks[b] = Matrix(p.weights[b].rows(), p.weights[b].cols());
  auto& G = out.grads;
  const auto& W1 = p[Block::enc_w1];
  const auto& b1 = p[Block::enc_b1];
  const auto& Wm = p[Block::mu_w];
  const auto& bm = p[Block::mu_b];
  const auto& Wl = p[Block::logvar_w];
  const auto& bl = p[Block::logvar_b];
  const auto& D1 = p[Block::dec_w1];
  const auto& c1 = p[Block::dec_b1];
  const auto& D2 = p[Block::dec_w2];
  const auto& c2 = p[Block::dec_b2];

  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> a1(H), h1(H), mu(L), raw(L), lv(L), z(L), a2(H), h2(H), y(D);
    for (std::size_t j = 0; j < H; ++j) {
      double s = b1(0, j);
      for (std::size_t i = 0; i < D; ++i) s += batch(r, i) * W1(i, j);
      a1[j] = s;
      h1[j] = s > 0 ? s : 0;
    }
    for (std::size_t k = 0; k < L; ++k) {
      double sm = bm(0, k), sl = bl(0, k);
      for (std::size_t j = 0; j < H; ++j) {
        sm += h1[j] * Wm(j, k);
        sl += h1[j] * Wl(j, k);
      }
      mu[k] = sm;
      raw[k] = sl;
      lv[k] = std::clamp(sl, kLogvarMin, kLogvarMax);
      z[k] = mu[k] + std::exp(lv[k] / 2) * eps(r, k);
    }
    for (std::size_t j = 0; j < H; ++j) {
      double s = c1(0, j);
      for (std::size_t k = 0; k < L; ++k) s += z[k] * D1(k, j);
      a2[j] = s;
      h2[j] = s > 0 ? s : 0;
    }
    double recon = 0;
    for (std::size_t i = 0; i < D; ++i) {
      double s = c2(0, i);
      for (std::size_t j = 0; j < H; ++j) s += h2[j] * D2(j, i);
      y[i] = sigmoid(s);
      recon += (batch(r, i) - y[i]) * (batch(r, i) - y[i]);
    }
    double kl = 0;
    for (std::size_t k = 0; k < L; ++k) kl += -0.5 * (1 + lv[k] - mu[k] * mu[k] - std::exp(lv[k]));
    out.loss.recon += recon * inv_n;
    out.loss.kl += kl * inv_n;

    std::vector<double> da3(D), dh2(H, 0.0), dz(L, 0.0), dmu(L), dlv(L), dh1(H, 0.0);
    for (std::size_t i = 0; i < D; ++i) {
      da3[i] = 2 * (y[i] - batch(r, i)) * inv_n * y[i] * (1 - y[i]);
      G[Block::dec_b2](0, i) += da3[i];
      for (std::size_t j = 0; j < H; ++j) {
        G[Block::dec_w2](j, i) += h2[j] * da3[i];
        dh2[j] += da3[i] * D2(j, i);
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double da2 = a2[j] > 0 ? dh2[j] : 0.0;
      G[Block::dec_b1](0, j) += da2;
      for (std::size_t k = 0; k < L; ++k) {
        G[Block::dec_w1](k, j) += z[k] * da2;
        dz[k] += da2 * D1(k, j);
      }
    }
    for (std::size_t k = 0; k < L; ++k) {
      dmu[k] = dz[k] + beta * mu[k] * inv_n;
      const bool inside = raw[k] > kLogvarMin && raw[k] < kLogvarMax;
      dlv[k] = inside ? dz[k] * eps(r, k) * 0.5 * std::exp(lv[k] / 2) +
                            beta * 0.5 * (std::exp(lv[k]) - 1) * inv_n
                      : 0.0;
      G[Block::mu_b](0, k) += dmu[k];
      G[Block::logvar_b](0, k) += dlv[k];
      for (std::size_t j = 0; j < H; ++j) {
        G[Block::mu_w](j, k) += h1[j] * dmu[k];
        G[Block::logvar_w](j, k) += h1[j] * dlv[k];
        dh1[j] += dmu[k] * Wm(j, k) + dlv[k] * Wl(j, k);
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double da1 = a1[j] > 0 ? dh1[j] : 0.0;
      G[Block::enc_b1](0, j) += da1;
      for (std::size_t i = 0; i < D; ++i) G[Block::enc_w1](i, j) += batch(r, i) * da1;
    }
  }
  out.loss.total = out.loss.recon + beta * out.loss.kl;
  return out;
}

NonFiniteGradient::NonFiniteGradient(std::string_view block)
    : std::runtime_error("non-finite gradient in parameter block " + std::string(block)),
      block_(block) {}

void step(VaeParams& params, const Gradients& grads, const VaeConfig& cfg) {
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const Matrix& g = grads.blocks[b];
    if (g.rows() != params.weights[b].rows() || g.cols() != params.weights[b].cols())
      throw ShapeError("step: gradient shape mismatch in " + std::string(block_name(b)));
    if (!g.all_finite()) throw NonFiniteGradient(block_name(b));
  }
  ++params.adam_step;
  const double t = static_cast<double>(params.adam_step);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    auto w = params.weights[b].data();
    auto m = params.adam_m[b].data();
    auto v = params.adam_v[b].data();
    auto g = grads.blocks[b].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
}

double kl_anneal_weight(std::size_t epoch, const VaeConfig& cfg) {
  if (cfg.anneal.kind == Anneal::Kind::none) return cfg.beta;
  const double ramp = static_cast<double>(cfg.anneal.ramp_epochs);
  return cfg.beta * std::min(1.0, static_cast<double>(epoch) / ramp);
}

TrainResult train(const Matrix& data, const VaeConfig& cfg, const EpochObserver& observer) {
  cfg.validate();
  if (data.rows() == 0) throw EmptyTrainingSet("training set is empty");
  require_cols(data, cfg.input_dim, "train data");

  Rng init_rng(cfg.seed, kInitStream);
  TrainResult result{init_params(cfg, init_rng), {}};
  const Rng train_root(cfg.seed, kTrainStream);
  const std::size_t n = data.rows();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = train_root.child(epoch);
    const double beta_eff = kl_anneal_weight(epoch, cfg);
    const auto order = shuffled_indices(rng, n);
    double recon_sum = 0.0, kl_sum = 0.0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      Matrix batch(count, cfg.input_dim);
      for (std::size_t r = 0; r < count; ++r) {
        const auto src = data.row(order[start + r]);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }
      Matrix eps(count, cfg.latent_dim, sample_standard_normal(rng, count * cfg.latent_dim));
      BackwardResult br = backward(result.params, batch, eps, beta_eff);
      recon_sum += br.loss.recon * static_cast<double>(count);
      kl_sum += br.loss.kl * static_cast<double>(count);
      step(result.params, br.grads, cfg);
    }

    LossBreakdown epoch_loss;
    epoch_loss.epoch = epoch;
    epoch_loss.recon = recon_sum / static_cast<double>(n);
    epoch_loss.kl = kl_sum / static_cast<double>(n);
    epoch_loss.beta_effective = beta_eff;
    epoch_loss.total = epoch_loss.recon + beta_eff * epoch_loss.kl;
    result.history.push_back(epoch_loss);
    if (observer && !observer(epoch_loss, result.params)) break;
  }
  return result;
}

std::vector<double> flatten(const GrayImage& img) {
  return {img.pixels().begin(), img.pixels().end()};
}

std::size_t image_side(const VaeConfig& cfg) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cfg.input_dim))));
  if (side * side != cfg.input_dim)
    throw std::invalid_argument("input_dim " + std::to_string(cfg.input_dim) + " is not a square");
  return side;
}

ImageLoader disk_loader(std::size_t side) {
  return [side](const Manifest& m, const ManifestRow& row) {
    GrayImage img = load_image(m.resolve(row));
    if (img.width() == side && img.height() == side) return img;
    return resize(pad_to_square(img), side);
  };
}

Matrix load_training_matrix(const Manifest& manifest, bool one_class, const ImageLoader& loader) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  for (const auto& row : manifest.rows) {
    if (one_class && row.label != Label::genuine) continue;
    const GrayImage img = loader(manifest, row);
    if (rows == 0) cols = img.size();
    if (img.size() != cols) throw ShapeError("training images differ in size: " + row.path);
    values.insert(values.end(), img.pixels().begin(), img.pixels().end());
    ++rows;
  }
  if (rows == 0) {
    throw EmptyTrainingSet(one_class ? "no genuine images to train on"
                                     : "no images to train on");
  }
  return Matrix(rows, cols, std::move(values));
}

TrainResult train(const Manifest& manifest, const VaeConfig& cfg, bool one_class,
                  const ImageLoader& loader, const EpochObserver& observer) {
  return train(load_training_matrix(manifest, one_class, loader), cfg, observer);
}

double reconstruction_error(const VaeParams& params, std::span<const double> x) {
  const auto [mu, logvar] = encode(params, x);
  const auto y = decode(params, mu);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

std::vector<double> reconstruction_errors(const VaeParams& params, const Matrix& x) {
  const Encoded e = encode(params, x);
  const Matrix y = decode(params, e.mu);
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[r] += (x(r, c) - y(r, c)) * (x(r, c) - y(r, c));
  return out;
}

GrayImage generate(const VaeParams& params, std::span<const double> z) {
  if (z.size() != params.config.latent_dim) throw ShapeError("generate: z length != latent_dim");
  const std::size_t side = image_side(params.config);
  return GrayImage(side, side, decode(params, z));
}

}  // namespace sigvae::vae
