#pragma once

// Fully connected variational autoencoder with hand-written backpropagation.
//
//   x -> relu(x W1 + b1) = h -> mu = h Wmu + bmu
//                            -> logvar = clamp(h Wlv + blv, -10, 10)
//   z = mu + exp(logvar / 2) * eps,  eps ~ N(0, I)
//   z -> relu(z D1 + c1) = g -> x_hat = sigmoid(g D2 + c2)
//
// Loss per example: sum_pixels (x - x_hat)^2 + beta * KL(q(z|x) || N(0, I)),
// averaged over the batch. Weight matrices are stored (fan_in x fan_out) so a
// row-major batch multiplies on the left.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sigvae/image.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/matrix.hpp"
#include "sigvae/rng.hpp"

namespace sigvae::vae {

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct Anneal {
  enum class Kind { none, linear };
  Kind kind = Kind::none;
  std::size_t ramp_epochs = 0;

  static Anneal none() { return {}; }
  static Anneal linear(std::size_t ramp) { return {Kind::linear, ramp}; }
  friend bool operator==(const Anneal&, const Anneal&) = default;
};

struct VaeConfig {
  std::size_t input_dim = 128 * 128;
  std::size_t intermediate_dim = 512;
  std::size_t latent_dim = 256;
  double beta = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Anneal anneal;

  void validate() const;
  friend bool operator==(const VaeConfig&, const VaeConfig&) = default;
};

/// Parameter blocks in checkpoint order.
enum class Block : std::size_t {
  enc_w1,
  enc_b1,
  mu_w,
  mu_b,
  logvar_w,
  logvar_b,
  dec_w1,
  dec_b1,
  dec_w2,
  dec_b2,
};
inline constexpr std::size_t kBlockCount = 10;
std::string_view block_name(Block b);
std::string_view block_name(std::size_t index);

using BlockSet = std::array<Matrix, kBlockCount>;

struct VaeParams {
  VaeConfig config;
  BlockSet weights;
  // Adam first and second moments, one per block.
  BlockSet adam_m;
  BlockSet adam_v;
  std::uint64_t adam_step = 0;

  Matrix& operator[](Block b) { return weights[static_cast<std::size_t>(b)]; }
  const Matrix& operator[](Block b) const { return weights[static_cast<std::size_t>(b)]; }

  bool all_finite() const;
  friend bool operator==(const VaeParams&, const VaeParams&) = default;
};

struct Gradients {
  BlockSet blocks;
  Matrix& operator[](Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const Matrix& operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }
};

/// Per-example latent quantities.
struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> eps;
  std::vector<double> z;
};

struct LossBreakdown {
  std::size_t epoch = 0;
  double recon = 0.0;
  double kl = 0.0;
  double beta_effective = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Glorot-uniform weights, zero biases, zero optimizer state.
VaeParams init_params(const VaeConfig& cfg, Rng& rng);
/// All-zero weights and biases with the shapes implied by cfg.
VaeParams zero_params(const VaeConfig& cfg);

struct Encoded {
  Matrix mu;
  Matrix logvar;
};

/// Batch encode; rows of x are flattened images.
Encoded encode(const VaeParams& params, const Matrix& x);
/// Single-example encode.
std::pair<std::vector<double>, std::vector<double>> encode(const VaeParams& params,
                                                           std::span<const double> x);

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps);
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps);

Matrix decode(const VaeParams& params, const Matrix& z);
std::vector<double> decode(const VaeParams& params, std::span<const double> z);

/// Closed-form KL(N(mu, exp(logvar)) || N(0, I)).
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);
/// Per-dimension KL terms; they sum to kl_divergence.
std::vector<double> kl_per_dim(std::span<const double> mu, std::span<const double> logvar);

/// Single-example loss. epoch is left 0.
LossBreakdown loss(std::span<const double> x, const LatentCode& code,
                   std::span<const double> x_hat, double beta_effective);

struct BackwardResult {
  Gradients grads;
  /// Batch means of the loss terms at the current parameters.
  LossBreakdown loss;
};

/// Exact gradients of the batch-mean loss, treating eps as a constant.
BackwardResult backward(const VaeParams& params, const Matrix& batch, const Matrix& eps,
                        double beta_effective);

/// Per-example scalar-loop implementation of backward, kept as a test reference.
BackwardResult backward_reference(const VaeParams& params, const Matrix& batch, const Matrix& eps,
                                  double beta_effective);

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::string_view block);
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected) in place. Leaves
/// params untouched and throws NonFiniteGradient if any gradient is not finite.
void step(VaeParams& params, const Gradients& grads, const VaeConfig& cfg);

double kl_anneal_weight(std::size_t epoch, const VaeConfig& cfg);

struct TrainResult {
  VaeParams params;
  std::vector<LossBreakdown> history;
};

/// Called after every epoch; returning false stops training early.
using EpochObserver = std::function<bool(const LossBreakdown&, const VaeParams&)>;

/// Trains on the rows of data (values in [0,1]).
TrainResult train(const Matrix& data, const VaeConfig& cfg, const EpochObserver& observer = {});

/// Reads one manifest row into a flattened image.
using ImageLoader = std::function<GrayImage(const Manifest&, const ManifestRow&)>;

/// Loads images from disk, resizing to side x side when needed.
ImageLoader disk_loader(std::size_t side);

class EmptyTrainingSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flattens manifest images into rows. With one_class only genuine rows are
/// read; forged rows are never passed to the loader.
Matrix load_training_matrix(const Manifest& manifest, bool one_class, const ImageLoader& loader);

TrainResult train(const Manifest& manifest, const VaeConfig& cfg, bool one_class,
                  const ImageLoader& loader, const EpochObserver& observer = {});

/// Summed squared error of decode(mu(x)); consumes no randomness.
double reconstruction_error(const VaeParams& params, std::span<const double> x);
std::vector<double> reconstruction_errors(const VaeParams& params, const Matrix& x);

/// Decodes z into a square image.
GrayImage generate(const VaeParams& params, std::span<const double> z);

std::vector<double> flatten(const GrayImage& img);
std::size_t image_side(const VaeConfig& cfg);

}  // namespace sigvae::vae
