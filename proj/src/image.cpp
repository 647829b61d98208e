#include "sigvae/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace sigvae {

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {
  if (width == 0 || height == 0) throw std::invalid_argument("GrayImage: empty dimensions");
}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) throw std::invalid_argument("GrayImage: empty dimensions");
  if (pixels_.size() != width * height) {
    throw std::invalid_argument("GrayImage: pixel count does not match dimensions");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("GrayImage: intensity outside [0,1]");
  }
}

double sample_bilinear(const GrayImage& img, double x, double y, double outside) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double fx = x - fx0;
  const double fy = y - fy0;
  const auto w = static_cast<long long>(img.width());
  const auto h = static_cast<long long>(img.height());
  const auto x0 = static_cast<long long>(fx0);
  const auto y0 = static_cast<long long>(fy0);
  auto read = [&](long long px, long long py) {
    if (px < 0 || py < 0 || px >= w || py >= h) return outside;
    return img.at(static_cast<std::size_t>(px), static_cast<std::size_t>(py));
  };
  const double top = (1.0 - fx) * read(x0, y0) + fx * read(x0 + 1, y0);
  const double bottom = (1.0 - fx) * read(x0, y0 + 1) + fx * read(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

double sample_bilinear_clamped(const GrayImage& img, double x, double y) {
  const double max_x = static_cast<double>(img.width() - 1);
  const double max_y = static_cast<double>(img.height() - 1);
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

double mean_abs_diff(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("mean_abs_diff: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.pixels()[i] - b.pixels()[i]);
  return s / static_cast<double>(a.size());
}

double ink_fraction(const GrayImage& img) {
  const auto px = img.pixels();
  const auto ink = std::count_if(px.begin(), px.end(), [](double v) { return v < 0.5; });
  return static_cast<double>(ink) / static_cast<double>(px.size());
}

int intensity_bin(double v) noexcept {
  const long b = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<int>(b);
}

int otsu_threshold_bin(std::span<const std::size_t, 256> histogram) {
  double total = 0.0, total_sum = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += static_cast<double>(histogram[i]);
    total_sum += static_cast<double>(i) * static_cast<double>(histogram[i]);
  }
  if (total == 0.0) return 0;

  double best = 0.0;
  int best_t = 0;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 1; t < 256; ++t) {
    w0 += static_cast<double>(histogram[t - 1]);
    sum0 += static_cast<double>(t - 1) * static_cast<double>(histogram[t - 1]);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_sum - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

BinarizeResult binarize(const GrayImage& img, BinarizeMode mode) {
  BinarizeResult result{GrayImage(img.width(), img.height()), mode.threshold, false};
  auto out = result.image.pixels();
  const auto in = img.pixels();

  if (mode.kind == BinarizeMode::Kind::fixed) {
    if (!(mode.threshold > 0.0 && mode.threshold < 1.0)) {
      throw std::invalid_argument("binarize: fixed threshold must lie in (0,1)");
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= mode.threshold ? 1.0 : 0.0;
    return result;
  }

  std::array<std::size_t, 256> hist{};
  for (double v : in) ++hist[static_cast<std::size_t>(intensity_bin(v))];
  const int t = otsu_threshold_bin(hist);
  if (t == 0) {
    result.degenerate = true;
    result.threshold = 0.0;
    std::fill(out.begin(), out.end(), kBackground);
    return result;
  }
  result.threshold = (static_cast<double>(t) - 0.5) / 255.0;
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = intensity_bin(in[i]) >= t ? 1.0 : 0.0;
  return result;
}

GrayImage pad_to_square(const GrayImage& img) {
  const std::size_t side = std::max(img.width(), img.height());
  if (img.width() == side && img.height() == side) return img;
  GrayImage out(side, side, kBackground);
  const std::size_t ox = (side - img.width()) / 2;
  const std::size_t oy = (side - img.height()) / 2;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) out.at(x + ox, y + oy) = img.at(x, y);
  return out;
}

GrayImage resize(const GrayImage& img, std::size_t target) {
  if (target == 0) throw std::invalid_argument("resize: target must be >= 1");
  GrayImage out(target, target);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(target);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(target);
  for (std::size_t y = 0; y < target; ++y) {
    const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < target; ++x) {
      const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
      out.at(x, y) = std::clamp(sample_bilinear_clamped(img, src_x, src_y), 0.0, 1.0);
    }
  }
  return out;
}

void PreprocessConfig::validate() const {
  if (target_size < 8) throw std::invalid_argument("preprocess.target_size must be >= 8");
  if (binarize_mode.kind == BinarizeMode::Kind::fixed &&
      !(binarize_mode.threshold > 0.0 && binarize_mode.threshold < 1.0)) {
    throw std::invalid_argument("preprocess.threshold must lie in (0,1)");
  }
}

PreprocessResult preprocess(const GrayImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  BinarizeResult bin = binarize(img, cfg.binarize_mode);
  GrayImage staged = cfg.pad_before_resize ? pad_to_square(bin.image) : std::move(bin.image);
  return {resize(staged, cfg.target_size), bin.degenerate};
}

}  // namespace sigvae
