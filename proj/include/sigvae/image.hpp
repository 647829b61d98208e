#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigvae {

/// Intensity of blank paper. Ink is 0.0.
inline constexpr double kBackground = 1.0;

/// Grayscale image, row-major, intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, double fill = kBackground);
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

/// Bilinear sample at continuous pixel coordinates (pixel centers sit on
/// integers). Neighbours outside the image read as `outside`.
double sample_bilinear(const GrayImage& img, double x, double y, double outside);

/// Bilinear sample with coordinates clamped to the image.
double sample_bilinear_clamped(const GrayImage& img, double x, double y);

/// Mean absolute pixel difference; images must share dimensions.
double mean_abs_diff(const GrayImage& a, const GrayImage& b);

/// Fraction of pixels darker than 0.5.
double ink_fraction(const GrayImage& img);

// --- preprocessing -------------------------------------------------------

struct BinarizeMode {
  enum class Kind { otsu, fixed };
  Kind kind = Kind::otsu;
  double threshold = 0.5;  // used by fixed

  static BinarizeMode otsu() { return {}; }
  static BinarizeMode fixed(double t) { return {Kind::fixed, t}; }
};

struct BinarizeResult {
  GrayImage image;
  /// Pixels with intensity >= threshold become background (1).
  double threshold = 0.5;
  /// Otsu saw a single populated histogram bin; the output is all background.
  bool degenerate = false;
};

/// Histogram bin (0..255) of an intensity.
int intensity_bin(double v) noexcept;

/// Otsu threshold bin T in [1, 255]: pixels with bin >= T are background.
/// Returns 0 for a histogram with a single populated bin.
int otsu_threshold_bin(std::span<const std::size_t, 256> histogram);

BinarizeResult binarize(const GrayImage& img, BinarizeMode mode);

/// Centers the image on a white square canvas; odd remainders go right/bottom.
GrayImage pad_to_square(const GrayImage& img);

/// Bilinear resize to target x target with edge clamping.
GrayImage resize(const GrayImage& img, std::size_t target);

struct PreprocessConfig {
  std::size_t target_size = 128;
  bool pad_before_resize = true;
  BinarizeMode binarize_mode = BinarizeMode::otsu();

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct PreprocessResult {
  GrayImage image;
  bool degenerate_histogram = false;
};

/// binarize -> optional pad -> resize.
PreprocessResult preprocess(const GrayImage& img, const PreprocessConfig& cfg);

}  // namespace sigvae
