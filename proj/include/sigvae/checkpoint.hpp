#pragma once

// Model checkpoint layout (all integers and doubles little-endian):
//
//   "SVAE"                  4-byte magic
//   u32 version             currently 1
//   config block            u32 input_dim, u32 intermediate_dim, u32 latent_dim,
//                           f64 beta, f64 learning_rate, u32 epochs, u32 batch_size,
//                           u64 seed, u32 anneal_kind (0 none, 1 linear),
//                           u32 anneal_ramp_epochs
//   u64 adam_step
//   weight blocks           10 x (u32 rows, u32 cols, f64[rows*cols]) in Block order
//   adam first moments      same layout
//   adam second moments     same layout

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigvae/vae.hpp"

namespace sigvae::vae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize(const VaeParams& params);
VaeParams deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const VaeParams& params);
VaeParams load_checkpoint(const std::filesystem::path& path);

/// JSON sidecar with the config and the final loss entry (if any).
std::string sidecar_json(const VaeParams& params, const std::vector<LossBreakdown>& history);

/// CSV `epoch,recon,kl,beta_effective,total`, doubles printed round-trip exact.
std::string format_loss_history(const std::vector<LossBreakdown>& history);
std::vector<LossBreakdown> parse_loss_history(const std::string& csv);

}  // namespace sigvae::vae
