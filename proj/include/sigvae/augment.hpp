#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "sigvae/image.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/rng.hpp"

namespace sigvae {

struct AugmentConfig {
  double max_rotation_deg = 45.0;
  double intensity_shift_max = 0.2;
  double width_shift_frac = 0.1;
  double height_shift_frac = 0.1;
  double zoom_low = 0.9;
  double zoom_high = 1.1;
  std::size_t copies_per_image = 16;

  void validate() const;
};

/// Rotation about the image center; uncovered area is background.
GrayImage rotate(const GrayImage& img, double angle_deg);
/// Adds delta to every ink pixel (value < 1), clamped to [0, 1].
GrayImage shift_intensity(const GrayImage& img, double delta);
/// Moves content by (dx * width, dy * height) pixels.
GrayImage shift_translate(const GrayImage& img, double dx, double dy);
/// Scales about the center; factor > 1 enlarges the content.
GrayImage zoom(const GrayImage& img, double factor);

/// Parameters of one random transform draw.
struct AugmentDraw {
  double angle_deg = 0.0;
  double zoom = 1.0;
  double dx = 0.0;
  double dy = 0.0;
  double intensity = 0.0;
};

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng);
/// Applies rotate -> zoom -> translate -> intensity.
GrayImage apply_augment(const GrayImage& img, const AugmentDraw& draw);

/// cfg.copies_per_image randomized copies.
std::vector<GrayImage> augment_image(const GrayImage& img, const AugmentConfig& cfg, Rng& rng);

struct AugmentDatasetResult {
  std::vector<ManifestRow> rows;  // relative to out_dir
  std::vector<std::filesystem::path> written;
  std::vector<std::string> failures;
};

/// Augments every manifest row into out_dir/<identity>/<stem>_augNN.pgm, keeping
/// a copy of each original as out_dir/<identity>/<stem>.pgm. Row i draws from
/// the child stream (seed, i), so thread count never changes the output.
AugmentDatasetResult augment_dataset(const Manifest& manifest, const AugmentConfig& cfg,
                                     std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace sigvae
