#pragma once

#include <cstdint>
#include <vector>

namespace sigvae {

/// Counter-based splittable generator.
///
/// Output i of a stream is mix(key + i * gamma), where key is derived from
/// (seed, stream id) and mix is the SplitMix64 finalizer. Child streams hash
/// the parent key with a stream id and never consume parent output, so work
/// can be partitioned up front and run in any order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via the Box-Muller transform (pairs cached).
  double normal();

  /// Independent child stream keyed by id; does not advance this stream.
  Rng child(std::uint64_t id) const;

  std::uint64_t key() const noexcept { return key_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

/// n i.i.d. N(0, 1) draws.
std::vector<double> sample_standard_normal(Rng& rng, std::size_t n);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(Rng& rng, std::size_t n);

}  // namespace sigvae
