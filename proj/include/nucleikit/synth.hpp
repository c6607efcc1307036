// Synthetic nuclei scenes: ellipse ground truth plus degraded whole-nucleus,
// centre and border probability maps.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nucleikit/core.hpp"
#include "nucleikit/filter.hpp"
#include "nucleikit/morph.hpp"
#include "nucleikit/rng.hpp"

namespace nucleikit {

struct SceneSpec {
  int width = 128;
  int height = 128;
  int nucleus_count = 10;
  double radius_min = 8.0;  // semi-axis lengths in pixels
  double radius_max = 12.0;
  bool overlap_allowed = false;
  /// With overlap allowed and a positive factor, nuclei are placed in pairs
  /// whose centres are this factor times the pair's mean radius apart.
  double max_center_distance_factor = 0.0;
  double noise_sigma = 0.05;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("scene: dimensions must be positive");
    if (nucleus_count < 0) throw std::invalid_argument("scene: nucleus_count must be >= 0");
    if (!(radius_min > 0.0) || !(radius_min <= radius_max) || !std::isfinite(radius_max))
      throw std::invalid_argument("scene: radius range must satisfy 0 < min <= max");
    if (!(max_center_distance_factor >= 0.0)) throw std::invalid_argument("scene: center distance factor must be >= 0");
    if (!(noise_sigma >= 0.0) || !(blur_sigma >= 0.0)) throw std::invalid_argument("scene: sigmas must be >= 0");
  }
};

struct Ellipse {
  double cx = 0;
  double cy = 0;
  double semi_major = 0;
  double semi_minor = 0;
  double angle = 0;  // radians, orientation of the major axis

  bool contains(double x, double y) const noexcept {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (dx * c + dy * s) / semi_major;
    const double v = (-dx * s + dy * c) / semi_minor;
    return u * u + v * v <= 1.0;
  }
};

struct Scene {
  LabelMap gt;
  Raster whole_prob;
  Raster center_prob;
  Raster border_prob;
  std::vector<Ellipse> nuclei;
};

/// Background pixels kept between nuclei when overlap is not allowed.
inline constexpr int kNucleusGap = 3;
inline constexpr int kPlacementAttempts = 1000;

namespace detail {

struct PixelBox {
  int x0, y0, x1, y1;  // inclusive
};

inline PixelBox bounds(const Ellipse& e, int width, int height) {
  const double r = e.semi_major;
  return PixelBox{std::max(0, static_cast<int>(std::floor(e.cx - r))), std::max(0, static_cast<int>(std::floor(e.cy - r))),
                  std::min(width - 1, static_cast<int>(std::ceil(e.cx + r))),
                  std::min(height - 1, static_cast<int>(std::ceil(e.cy + r)))};
}

inline std::vector<std::size_t> rasterize(const Ellipse& e, const LabelMap& canvas) {
  std::vector<std::size_t> px;
  const PixelBox b = bounds(e, canvas.width(), canvas.height());
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x)
      if (e.contains(x, y)) px.push_back(canvas.index(x, y));
  return px;
}

inline Raster indicator(const BinaryMask& m) {
  Raster r(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) r.samples()[i] = m[i] ? 1.0f : 0.0f;
  return r;
}

inline Raster degrade(const BinaryMask& m, const SceneSpec& spec, std::uint64_t stream) {
  Raster r = indicator(m);
  if (spec.blur_sigma > 0.0) r = gaussian_blur(r, spec.blur_sigma);
  return add_gaussian_noise(r, spec.noise_sigma, derive_seed(spec.seed, stream));
}

}  // namespace detail

/// Places the nuclei, paints the ground truth and renders the degraded maps.
///
/// Ground truth gives overlap pixels to the nucleus with the nearer centre.
/// Each nucleus' centre region is its ground-truth instance eroded by a disk
/// of radius round(semi_minor / 3) (at least 1); the border region is the rest
/// of the instance.  Every map is blurred with blur_sigma, receives additive
/// N(0, noise_sigma^2) noise and is clamped to [0,1].
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int w = spec.width;
  const int h = spec.height;
  const bool pairs = spec.overlap_allowed && spec.max_center_distance_factor > 0.0;

  Scene scene;
  // Pixels new nuclei may not touch: existing nuclei grown by the gap (or,
  // in pair mode, previously completed pairs).
  BinaryMask forbidden(w, h);
  BinaryMask pending(w, h);
  auto block = [&](const std::vector<std::size_t>& px) {
    for (const auto i : px) pending[i] = 1;
  };
  auto commit = [&]() {
    const BinaryMask grown = dilate(pending, StructuringElement::disk(kNucleusGap));
    for (std::size_t i = 0; i < grown.size(); ++i)
      if (grown[i]) forbidden[i] = 1;
    pending = BinaryMask(w, h);
  };
  const LabelMap canvas(w, h);

  for (int n = 0; n < spec.nucleus_count; ++n) {
    const bool second_of_pair = pairs && n % 2 == 1;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Ellipse e;
      const double a = rng.uniform(spec.radius_min, spec.radius_max);
      const double b = rng.uniform(spec.radius_min, spec.radius_max);
      e.semi_major = std::max(a, b);
      e.semi_minor = std::min(a, b);
      e.angle = rng.uniform(0.0, std::numbers::pi);
      if (second_of_pair) {
        const Ellipse& first = scene.nuclei.back();
        const double mean_radius = (first.semi_major + first.semi_minor + e.semi_major + e.semi_minor) / 4.0;
        const double dist = spec.max_center_distance_factor * mean_radius;
        const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
        e.cx = first.cx + dist * std::cos(dir);
        e.cy = first.cy + dist * std::sin(dir);
      } else {
        e.cx = rng.uniform(0.0, w);
        e.cy = rng.uniform(0.0, h);
      }
      // Keep every nucleus (and its gap) inside the image; the first of a pair
      // also leaves room for its partner.
      double margin = e.semi_major + 1.0;
      if (pairs && !second_of_pair && n + 1 < spec.nucleus_count)
        margin += spec.max_center_distance_factor * spec.radius_max + spec.radius_max;
      if (e.cx < margin || e.cy < margin || e.cx > w - 1 - margin || e.cy > h - 1 - margin) continue;

      const std::vector<std::size_t> px = detail::rasterize(e, canvas);
      if (px.empty()) continue;
      if (!spec.overlap_allowed || pairs) {
        const bool clash = std::any_of(px.begin(), px.end(), [&](std::size_t i) { return forbidden[i] != 0; });
        if (clash) continue;
      }
      scene.nuclei.push_back(e);
      if (!spec.overlap_allowed) {
        block(px);
        commit();
      } else if (pairs) {
        block(px);
        if (second_of_pair || n + 1 == spec.nucleus_count) commit();
      }
      placed = true;
    }
    if (!placed) {
      throw std::invalid_argument("generate_scene: cannot place nucleus " + std::to_string(n + 1) + " of " +
                                  std::to_string(spec.nucleus_count) + " after " +
                                  std::to_string(kPlacementAttempts) + " attempts");
    }
  }

  // Ground truth: nearest centre wins overlaps, lower index on exact ties.
  LabelMap gt(w, h);
  std::vector<double> best(gt.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < scene.nuclei.size(); ++k) {
    const Ellipse& e = scene.nuclei[k];
    for (const std::size_t i : detail::rasterize(e, canvas)) {
      const double dx = static_cast<double>(i % static_cast<std::size_t>(w)) - e.cx;
      const double dy = static_cast<double>(i / static_cast<std::size_t>(w)) - e.cy;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best[i]) {
        best[i] = d2;
        gt[i] = static_cast<std::uint32_t>(k + 1);
      }
    }
  }

  BinaryMask whole(w, h);
  BinaryMask center(w, h);
  for (std::size_t k = 0; k < scene.nuclei.size(); ++k) {
    const Ellipse& e = scene.nuclei[k];
    const detail::PixelBox b = detail::bounds(e, w, h);
    const int bw = b.x1 - b.x0 + 3;
    const int bh = b.y1 - b.y0 + 3;
    BinaryMask own(bw, bh);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (gt(x, y) == k + 1) own(x - b.x0 + 1, y - b.y0 + 1) = 1;
    const int radius = std::max(1, static_cast<int>(std::lround(e.semi_minor / 3.0)));
    const BinaryMask core = erode(own, StructuringElement::disk(radius));
    for (int y = 0; y < bh; ++y)
      for (int x = 0; x < bw; ++x)
        if (core(x, y)) center(x + b.x0 - 1, y + b.y0 - 1) = 1;
  }
  BinaryMask border(w, h);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    whole[i] = gt[i] != 0 ? 1 : 0;
    border[i] = (gt[i] != 0 && !center[i]) ? 1 : 0;
  }

  scene.gt = canonicalize(gt);
  scene.whole_prob = detail::degrade(whole, spec, 1);
  scene.center_prob = detail::degrade(center, spec, 2);
  scene.border_prob = detail::degrade(border, spec, 3);
  return scene;
}

}  // namespace nucleikit
