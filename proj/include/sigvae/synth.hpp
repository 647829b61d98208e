#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sigvae/image.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/rng.hpp"

namespace sigvae::synth {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// A synthetic signer: a few pen strokes through control points in [0,1]^2.
struct IdentitySpec {
  std::uint64_t seed = 0;
  std::vector<std::vector<Point>> strokes;
  /// Pen width in pixels on a 64-pixel canvas; scaled with the render size.
  double stroke_width = 1.5;

  friend bool operator==(const IdentitySpec&, const IdentitySpec&) = default;
};

inline constexpr double kGenuineJitter = 0.01;
inline constexpr double kDefaultSkilledJitter = 0.05;

struct ForgeryKind {
  enum class Kind { skilled, random };
  Kind kind = Kind::random;
  /// Control-point jitter of skilled forgeries; must exceed kGenuineJitter.
  double scale = kDefaultSkilledJitter;

  static ForgeryKind random() { return {Kind::random, kDefaultSkilledJitter}; }
  static ForgeryKind skilled(double scale = kDefaultSkilledJitter) { return {Kind::skilled, scale}; }
};

/// Whole-signature placement applied about the canvas center after jitter.
struct Pose {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// Per-render pose spread: rotation and shift uniform in +-range, scale in
/// 1 +- scale_range. All zero disables pose variation.
struct PoseRange {
  double rotation_deg = 6.0;
  double scale_range = 0.06;
  double shift = 0.04;
};

Pose draw_pose(const PoseRange& range, Rng& rng);

IdentitySpec gen_identity(std::uint64_t seed);

/// Rasterizes the spec after perturbing every control point by N(0, jitter^2)
/// and then placing it with pose.
GrayImage render(const IdentitySpec& spec, double jitter, Rng& rng, std::size_t size,
                 const Pose& pose = {});

struct Dataset {
  std::vector<ManifestRow> rows;  // paths relative to the dataset root
  std::vector<GrayImage> images;  // parallel to rows
};

struct DatasetShape {
  std::size_t identities = 4;
  std::size_t genuine_per_id = 10;
  std::size_t forged_per_id = 10;
  std::size_t image_size = 32;
  /// Every image, genuine or forged, gets an independent pose from this range.
  PoseRange pose;
};

/// Genuine rows use kGenuineJitter; skilled forgeries reuse the victim's spec
/// with forgery.scale; random forgeries render an unrelated signer. Forged rows
/// carry the victim's identity.
Dataset make_dataset(const DatasetShape& shape, const ForgeryKind& forgery, std::uint64_t seed);

std::string identity_name(std::size_t index);

/// Writes every image plus manifest.csv under root; returns written files.
std::vector<std::filesystem::path> write_dataset(const Dataset& data,
                                                 const std::filesystem::path& root);

}  // namespace sigvae::synth
