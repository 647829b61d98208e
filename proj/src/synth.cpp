#include "sigvae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "sigvae/pnm.hpp"

namespace sigvae::synth {

namespace {

constexpr double kReferenceCanvas = 64.0;

struct Segment {
  double ax, ay, bx, by;
};

double dist_to_segment(double px, double py, const Segment& s) {
  const double vx = s.bx - s.ax, vy = s.by - s.ay;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - s.ax) * vx + (py - s.ay) * vy) / len2, 0.0, 1.0);
  const double dx = px - (s.ax + t * vx), dy = py - (s.ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Quadratic B-spline through the stroke: passes through both end points and
// the midpoints of interior legs, with interior control points as handles.
std::vector<Point> smooth_stroke(const std::vector<Point>& ctrl, std::size_t samples_per_piece) {
  if (ctrl.size() < 3) return ctrl;
  std::vector<Point> out;
  auto mid = [](Point a, Point b) { return Point{(a.x + b.x) / 2, (a.y + b.y) / 2}; };
  for (std::size_t i = 1; i + 1 < ctrl.size(); ++i) {
    const Point p0 = i == 1 ? ctrl[0] : mid(ctrl[i - 1], ctrl[i]);
    const Point p1 = ctrl[i];
    const Point p2 = i + 2 == ctrl.size() ? ctrl[i + 1] : mid(ctrl[i], ctrl[i + 1]);
    for (std::size_t k = (i == 1 ? 0 : 1); k <= samples_per_piece; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(samples_per_piece);
      const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
      out.push_back({a * p0.x + b * p1.x + c * p2.x, a * p0.y + b * p1.y + c * p2.y});
    }
  }
  return out;
}

}  // namespace

IdentitySpec gen_identity(std::uint64_t seed) {
  Rng rng(seed, 0x51);
  IdentitySpec spec;
  spec.seed = seed;
  const std::size_t n_strokes = 2 + rng.below(4);
  spec.stroke_width = rng.uniform(1.2, 2.2);

  const double left = 0.1, right = 0.9;
  const double band = (right - left) / static_cast<double>(n_strokes);
  const double baseline = rng.uniform(0.4, 0.6);
  for (std::size_t s = 0; s < n_strokes; ++s) {
    const std::size_t n_points = 3 + rng.below(4);
    const double x0 = left + band * static_cast<double>(s);
    std::vector<Point> stroke;
    for (std::size_t p = 0; p < n_points; ++p) {
      const double frac = static_cast<double>(p) / static_cast<double>(n_points - 1);
      const double x = x0 + band * (0.1 + 0.9 * frac) + rng.uniform(-0.35, 0.35) * band;
      const double y = baseline + rng.uniform(-0.28, 0.28);
      stroke.push_back({std::clamp(x, 0.05, 0.95), std::clamp(y, 0.05, 0.95)});
    }
    spec.strokes.push_back(std::move(stroke));
  }
  return spec;
}

Pose draw_pose(const PoseRange& range, Rng& rng) {
  Pose pose;
  pose.rotation_deg = rng.uniform(-range.rotation_deg, range.rotation_deg);
  pose.scale = 1.0 + rng.uniform(-range.scale_range, range.scale_range);
  pose.dx = rng.uniform(-range.shift, range.shift);
  pose.dy = rng.uniform(-range.shift, range.shift);
  return pose;
}

GrayImage render(const IdentitySpec& spec, double jitter, Rng& rng, std::size_t size,
                 const Pose& pose) {
  if (jitter < 0.0) throw std::invalid_argument("render: jitter must be >= 0");
  if (size == 0) throw std::invalid_argument("render: size must be >= 1");
  const double canvas = static_cast<double>(size);
  const double half_width =
      std::max(0.5, spec.stroke_width * canvas / kReferenceCanvas / 2.0);
  const std::size_t samples = std::max<std::size_t>(8, size / 4);
  const double theta = pose.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta) * pose.scale, sn = std::sin(theta) * pose.scale;

  std::vector<double> coverage(size * size, 0.0);
  for (const auto& stroke : spec.strokes) {
    std::vector<Point> pts = stroke;
    if (jitter > 0.0) {
      for (auto& p : pts) {
        p.x = std::clamp(p.x + jitter * rng.normal(), 0.0, 1.0);
        p.y = std::clamp(p.y + jitter * rng.normal(), 0.0, 1.0);
      }
    }
    for (auto& p : pts) {
      const double ux = p.x - 0.5, uy = p.y - 0.5;
      p = {0.5 + pose.dx + cs * ux - sn * uy, 0.5 + pose.dy + sn * ux + cs * uy};
    }
    const auto curve = smooth_stroke(pts, samples);
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
      const Segment seg{curve[i].x * canvas - 0.5, curve[i].y * canvas - 0.5,
                        curve[i + 1].x * canvas - 0.5, curve[i + 1].y * canvas - 0.5};
      const double reach = half_width + 1.0;
      const auto lo_x = static_cast<long>(std::floor(std::min(seg.ax, seg.bx) - reach));
      const auto hi_x = static_cast<long>(std::ceil(std::max(seg.ax, seg.bx) + reach));
      const auto lo_y = static_cast<long>(std::floor(std::min(seg.ay, seg.by) - reach));
      const auto hi_y = static_cast<long>(std::ceil(std::max(seg.ay, seg.by) + reach));
      const long last = static_cast<long>(size) - 1;
      for (long y = std::max(0L, lo_y); y <= std::min(last, hi_y); ++y) {
        for (long x = std::max(0L, lo_x); x <= std::min(last, hi_x); ++x) {
          const double d = dist_to_segment(static_cast<double>(x), static_cast<double>(y), seg);
          const double c = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
          double& cov = coverage[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)];
          cov = std::max(cov, c);
        }
      }
    }
  }
  std::vector<double> px(size * size);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = 1.0 - coverage[i];
  return GrayImage(size, size, std::move(px));
}

std::string identity_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id%02zu", index);
  return buf;
}

Dataset make_dataset(const DatasetShape& shape, const ForgeryKind& forgery, std::uint64_t seed) {
  if (shape.identities < 1 || shape.genuine_per_id < 1 || shape.forged_per_id < 1)
    throw std::invalid_argument("make_dataset: counts must be >= 1");
  if (forgery.kind == ForgeryKind::Kind::skilled && !(forgery.scale > kGenuineJitter))
    throw std::invalid_argument("make_dataset: skilled jitter must exceed the genuine jitter");

  const Rng root(seed);
  const std::size_t per_id = shape.genuine_per_id + shape.forged_per_id;
  Dataset data;
  data.rows.resize(shape.identities * per_id);
  data.images.resize(shape.identities * per_id);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(shape.identities); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Rng id_stream = root.child(i);
    const IdentitySpec spec = gen_identity(id_stream.child(0).next_u64());
    const std::string name = identity_name(i);
    char file[48];
    for (std::size_t j = 0; j < shape.genuine_per_id; ++j) {
      Rng rng = id_stream.child(1).child(j);
      Rng pose_rng = rng.child(0);
      std::snprintf(file, sizeof file, "/genuine_%03zu.pgm", j);
      data.rows[i * per_id + j] = {name + file, name, Label::genuine};
      data.images[i * per_id + j] = render(spec, kGenuineJitter, rng, shape.image_size,
                                            draw_pose(shape.pose, pose_rng));
    }
    for (std::size_t j = 0; j < shape.forged_per_id; ++j) {
      Rng rng = id_stream.child(2).child(j);
      Rng pose_rng = rng.child(0);
      const Pose pose = draw_pose(shape.pose, pose_rng);
      std::snprintf(file, sizeof file, "/forged_%03zu.pgm", j);
      const std::size_t slot = i * per_id + shape.genuine_per_id + j;
      data.rows[slot] = {name + file, name, Label::forged};
      if (forgery.kind == ForgeryKind::Kind::skilled) {
        data.images[slot] = render(spec, forgery.scale, rng, shape.image_size, pose);
      } else {
        const IdentitySpec other = gen_identity(id_stream.child(3).child(j).next_u64());
        data.images[slot] = render(other, kGenuineJitter, rng, shape.image_size, pose);
      }
    }
  }
  return data;
}

std::vector<std::filesystem::path> write_dataset(const Dataset& data,
                                                 const std::filesystem::path& root) {
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto path = root / data.rows[i].path;
    save_pgm(path, data.images[i]);
    written.push_back(path);
  }
  write_manifest(root / "manifest.csv", data.rows);
  written.push_back(root / "manifest.csv");
  return written;
}

}  // namespace sigvae::synth
