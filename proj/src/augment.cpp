#include "sigvae/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>

#include "sigvae/pnm.hpp"

namespace sigvae {

namespace {

double center(std::size_t extent) { return (static_cast<double>(extent) - 1.0) / 2.0; }

// Inverse-maps every output pixel through `src_of` and samples with white fill.
template <typename F>
GrayImage warp(const GrayImage& img, F src_of) {
  GrayImage out(img.width(), img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const auto [sx, sy] = src_of(static_cast<double>(x), static_cast<double>(y));
      out.at(x, y) = std::clamp(sample_bilinear(img, sx, sy, kBackground), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 180.0))
    throw std::invalid_argument("augment.max_rotation_deg must lie in [0,180]");
  if (!(zoom_low > 0.0 && zoom_low <= zoom_high))
    throw std::invalid_argument("augment.zoom_low/zoom_high must satisfy 0 < low <= high");
  if (zoom_low < 0.5 || zoom_high > 2.0)
    throw std::invalid_argument("augment zoom range must stay within [0.5,2]");
  if (copies_per_image < 1) throw std::invalid_argument("augment.copies_per_image must be >= 1");
  if (!(intensity_shift_max >= 0.0 && intensity_shift_max <= 1.0))
    throw std::invalid_argument("augment.intensity_shift_max must lie in [0,1]");
  if (!(width_shift_frac >= 0.0 && width_shift_frac <= 0.5) ||
      !(height_shift_frac >= 0.0 && height_shift_frac <= 0.5))
    throw std::invalid_argument("augment shift fractions must lie in [0,0.5]");
}

GrayImage rotate(const GrayImage& img, double angle_deg) {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = center(img.width()), cy = center(img.height());
  // Output (x, y) pulls from the input point rotated by -angle.
  return warp(img, [&](double x, double y) {
    const double ux = x - cx, uy = y - cy;
    return std::pair{cx + c * ux + s * uy, cy - s * ux + c * uy};
  });
}

GrayImage shift_intensity(const GrayImage& img, double delta) {
  if (std::abs(delta) > 1.0) throw std::invalid_argument("shift_intensity: |delta| must be <= 1");
  GrayImage out = img;
  for (double& v : out.pixels()) {
    if (v < kBackground) v = std::clamp(v + delta, 0.0, 1.0);
  }
  return out;
}

GrayImage shift_translate(const GrayImage& img, double dx, double dy) {
  if (std::abs(dx) > 0.5 || std::abs(dy) > 0.5)
    throw std::invalid_argument("shift_translate: |dx|,|dy| must be <= 0.5");
  const double px = dx * static_cast<double>(img.width());
  const double py = dy * static_cast<double>(img.height());
  return warp(img, [&](double x, double y) { return std::pair{x - px, y - py}; });
}

GrayImage zoom(const GrayImage& img, double factor) {
  if (!(factor >= 0.5 && factor <= 2.0)) throw std::invalid_argument("zoom: factor must lie in [0.5,2]");
  const double cx = center(img.width()), cy = center(img.height());
  return warp(img, [&](double x, double y) {
    return std::pair{cx + (x - cx) / factor, cy + (y - cy) / factor};
  });
}

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng) {
  AugmentDraw d;
  d.angle_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  d.zoom = rng.uniform(cfg.zoom_low, cfg.zoom_high);
  d.dx = rng.uniform(-cfg.width_shift_frac, cfg.width_shift_frac);
  d.dy = rng.uniform(-cfg.height_shift_frac, cfg.height_shift_frac);
  d.intensity = rng.uniform(-cfg.intensity_shift_max, cfg.intensity_shift_max);
  return d;
}

GrayImage apply_augment(const GrayImage& img, const AugmentDraw& d) {
  GrayImage out = rotate(img, d.angle_deg);
  out = zoom(out, d.zoom);
  out = shift_translate(out, d.dx, d.dy);
  return shift_intensity(out, d.intensity);
}

std::vector<GrayImage> augment_image(const GrayImage& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<GrayImage> out;
  out.reserve(cfg.copies_per_image);
  for (std::size_t i = 0; i < cfg.copies_per_image; ++i) {
    out.push_back(apply_augment(img, draw_augment(cfg, rng)));
  }
  return out;
}

AugmentDatasetResult augment_dataset(const Manifest& manifest, const AugmentConfig& cfg,
                                     std::uint64_t seed, const std::filesystem::path& out_dir) {
  cfg.validate();
  const std::size_t n = manifest.rows.size();
  const Rng root(seed);

  struct Work {
    std::optional<GrayImage> original;
    std::vector<GrayImage> copies;
    std::string error;
  };
  std::vector<Work> work(n);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto& row = manifest.rows[static_cast<std::size_t>(i)];
    try {
      GrayImage img = load_image(manifest.resolve(row));
      Rng rng = root.child(static_cast<std::uint64_t>(i));
      work[i].copies = augment_image(img, cfg, rng);
      work[i].original = std::move(img);
    } catch (const std::exception& e) {
      work[i].error = row.path + ": " + e.what();
    }
  }

  AugmentDatasetResult result;
  std::set<std::string> used;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = manifest.rows[i];
    if (!work[i].original) {
      result.failures.push_back(work[i].error);
      continue;
    }
    std::string stem = std::filesystem::path(row.path).stem().string();
    if (!used.insert(row.identity + "/" + stem).second) stem += "_r" + std::to_string(i);

    const std::string rel_orig = row.identity + "/" + stem + ".pgm";
    save_pgm(out_dir / rel_orig, *work[i].original);
    result.rows.push_back({rel_orig, row.identity, row.label});
    result.written.push_back(out_dir / rel_orig);

    for (std::size_t c = 0; c < work[i].copies.size(); ++c) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_aug%02zu.pgm", c);
      const std::string rel = row.identity + "/" + stem + suffix;
      save_pgm(out_dir / rel, work[i].copies[c]);
      result.rows.push_back({rel, row.identity, row.label});
      result.written.push_back(out_dir / rel);
    }
  }
  return result;
}

}  // namespace sigvae
