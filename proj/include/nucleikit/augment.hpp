// Seedable training-time augmentation of image/mask pairs.
//
// Geometry (always applied together): rotation by a multiple of 90 degrees
// clockwise, independent horizontal/vertical flips, zoom-in by a factor in
// [1.0, 1.4] followed by a crop.  Intensity: exactly one of none, contrast,
// brightness, Gaussian blur, Gaussian noise or gamma, each with probability
// 1/6.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "nucleikit/core.hpp"
#include "nucleikit/filter.hpp"
#include "nucleikit/rng.hpp"

namespace nucleikit {

enum class IntensityOp { none, contrast, brightness, gaussian_blur, gaussian_noise, gamma };

inline constexpr int kIntensityOpCount = 6;

inline const char* to_string(IntensityOp op) {
  switch (op) {
    case IntensityOp::none: return "none";
    case IntensityOp::contrast: return "contrast";
    case IntensityOp::brightness: return "brightness";
    case IntensityOp::gaussian_blur: return "gaussian_blur";
    case IntensityOp::gaussian_noise: return "gaussian_noise";
    case IntensityOp::gamma: return "gamma";
  }
  return "?";
}

struct ParameterRange {
  double lo;
  double hi;
};

inline ParameterRange intensity_range(IntensityOp op) {
  switch (op) {
    case IntensityOp::none: return {0.0, 0.0};
    case IntensityOp::contrast: return {0.5, 1.5};
    case IntensityOp::brightness: return {0.5, 1.5};
    case IntensityOp::gaussian_blur: return {1.0, 1.5};
    case IntensityOp::gaussian_noise: return {0.1, 0.1};
    case IntensityOp::gamma: return {0.5, 2.0};
  }
  return {0.0, 0.0};
}

inline constexpr double kMinScale = 1.0;
inline constexpr double kMaxScale = 1.4;

struct AugmentationPlan {
  int rotation = 0;  // degrees clockwise: 0, 90, 180 or 270
  bool flip_h = false;
  bool flip_v = false;
  double scale = 1.0;
  IntensityOp intensity = IntensityOp::none;
  double intensity_param = 0.0;
  /// Seed of the noise stream.
  std::uint64_t seed = 0;
  /// Crop window position in [0,1] per axis; only read with CropAnchor::random.
  double crop_x = 0.5;
  double crop_y = 0.5;

  void validate() const {
    if (rotation != 0 && rotation != 90 && rotation != 180 && rotation != 270)
      throw std::invalid_argument("plan: rotation must be 0, 90, 180 or 270");
    if (!(scale >= kMinScale && scale <= kMaxScale)) throw std::invalid_argument("plan: scale outside [1.0, 1.4]");
    const ParameterRange r = intensity_range(intensity);
    if (!(intensity_param >= r.lo && intensity_param <= r.hi))
      throw std::invalid_argument(std::string("plan: ") + to_string(intensity) + " parameter out of range");
    if (!(crop_x >= 0.0 && crop_x <= 1.0 && crop_y >= 0.0 && crop_y <= 1.0))
      throw std::invalid_argument("plan: crop position outside [0,1]");
  }

  friend bool operator==(const AugmentationPlan&, const AugmentationPlan&) = default;
};

/// Plan number `stream_index` of master seed `seed`.
inline AugmentationPlan sample_plan(std::uint64_t seed, std::uint64_t stream_index) {
  Rng rng(derive_seed(seed, stream_index));
  AugmentationPlan p;
  p.rotation = 90 * static_cast<int>(rng.below(4));
  p.flip_h = rng.coin();
  p.flip_v = rng.coin();
  p.scale = rng.uniform(kMinScale, kMaxScale);
  p.intensity = static_cast<IntensityOp>(rng.below(kIntensityOpCount));
  const ParameterRange r = intensity_range(p.intensity);
  p.intensity_param = r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
  p.seed = rng.next();
  p.crop_x = rng.uniform01();
  p.crop_y = rng.uniform01();
  return p;
}

// ---------------------------------------------------------------------------
// Geometry

enum class CropAnchor { center, random };

namespace detail {

struct Orientation {
  int rotation;
  bool flip_h;
  bool flip_v;
  int src_w;
  int src_h;

  int out_w() const noexcept { return rotation == 90 || rotation == 270 ? src_h : src_w; }
  int out_h() const noexcept { return rotation == 90 || rotation == 270 ? src_w : src_h; }

  // Source pixel shown at oriented pixel (x, y).  Rotation is applied first,
  // then the flips.
  std::pair<int, int> source(int x, int y) const noexcept {
    const int fx = flip_h ? out_w() - 1 - x : x;
    const int fy = flip_v ? out_h() - 1 - y : y;
    switch (rotation) {
      case 90: return {fy, src_h - 1 - fx};
      case 180: return {src_w - 1 - fx, src_h - 1 - fy};
      case 270: return {src_w - 1 - fy, fx};
      default: return {fx, fy};
    }
  }
};

}  // namespace detail

/// Rotation clockwise by a multiple of 90 degrees, then flips; a pure pixel
/// permutation.
inline Raster orient(const Raster& img, int rotation, bool flip_h, bool flip_v) {
  const detail::Orientation o{rotation, flip_h, flip_v, img.width(), img.height()};
  Raster out(o.out_w(), o.out_h(), img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        const auto [sx, sy] = o.source(x, y);
        out(x, y, c) = img(sx, sy, c);
      }
  return out;
}

inline LabelMap orient(const LabelMap& mask, int rotation, bool flip_h, bool flip_v) {
  const detail::Orientation o{rotation, flip_h, flip_v, mask.width(), mask.height()};
  LabelMap out(o.out_w(), o.out_h());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const auto [sx, sy] = o.source(x, y);
      out(x, y) = mask(sx, sy);
    }
  return out;
}

namespace detail {

// Maps patch pixel p to a continuous source index coordinate.
struct ZoomWindow {
  double center;
  double scale;
  int patch;

  double source(int p) const noexcept { return center + (p + 0.5 - patch / 2.0) / scale - 0.5; }
};

inline ZoomWindow zoom_window(int extent, int patch, double scale, CropAnchor anchor, double position) {
  const double half = patch / (2.0 * scale);
  double center = extent / 2.0;
  if (anchor == CropAnchor::random) center = half + position * (extent - 2.0 * half);
  return ZoomWindow{center, scale, patch};
}

}  // namespace detail

/// Applies the plan's geometry to an image and its label mask.  The image is
/// resampled bilinearly, the mask by nearest neighbour, so mask labels are
/// never mixed.  Label values are kept as-is (not canonicalized).
inline std::pair<Raster, LabelMap> apply_geometry(const Raster& img, const LabelMap& mask, const AugmentationPlan& plan,
                                                  int patch, CropAnchor anchor = CropAnchor::center) {
  plan.validate();
  if (!img.same_shape(mask)) throw std::invalid_argument("apply_geometry: image and mask differ in shape");
  if (patch <= 0) throw std::invalid_argument("apply_geometry: patch must be positive");
  if (img.width() < patch || img.height() < patch) {
    throw std::invalid_argument("apply_geometry: image " + std::to_string(img.width()) + "x" +
                                std::to_string(img.height()) + " is smaller than patch " + std::to_string(patch));
  }
  const Raster oi = orient(img, plan.rotation, plan.flip_h, plan.flip_v);
  const LabelMap om = orient(mask, plan.rotation, plan.flip_h, plan.flip_v);
  const int w = oi.width();
  const int h = oi.height();
  const detail::ZoomWindow wx = detail::zoom_window(w, patch, plan.scale, anchor, plan.crop_x);
  const detail::ZoomWindow wy = detail::zoom_window(h, patch, plan.scale, anchor, plan.crop_y);

  Raster out_img(patch, patch, img.channels());
  LabelMap out_mask(patch, patch);
  for (int py = 0; py < patch; ++py) {
    const double sy = wy.source(py);
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    const int ya = std::clamp(y0, 0, h - 1);
    const int yb = std::clamp(y0 + 1, 0, h - 1);
    const int yn = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, h - 1);
    for (int px = 0; px < patch; ++px) {
      const double sx = wx.source(px);
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      const int xa = std::clamp(x0, 0, w - 1);
      const int xb = std::clamp(x0 + 1, 0, w - 1);
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - fx) * oi(xa, ya, c) + fx * oi(xb, ya, c);
        const double bottom = (1.0 - fx) * oi(xa, yb, c) + fx * oi(xb, yb, c);
        out_img(px, py, c) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
      out_mask(px, py) = om(std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, w - 1), yn);
    }
  }
  return {std::move(out_img), std::move(out_mask)};
}

// ---------------------------------------------------------------------------
// Intensity

inline Raster apply_intensity(const Raster& img, const AugmentationPlan& plan) {
  plan.validate();
  require_finite(img);
  for (const float v : img.samples())
    if (v < 0.0f || v > 1.0f) throw std::invalid_argument("apply_intensity: samples must lie in [0,1]");

  const double param = plan.intensity_param;
  Raster out = img;
  switch (plan.intensity) {
    case IntensityOp::none:
      return out;
    case IntensityOp::contrast:
      for (int c = 0; c < out.channels(); ++c) {
        auto ch = out.channel(c);
        double mean = 0.0;
        for (const float v : ch) mean += v;
        mean /= static_cast<double>(ch.size());
        for (float& v : ch) v = static_cast<float>(mean + param * (static_cast<double>(v) - mean));
      }
      break;
    case IntensityOp::brightness:
      for (float& v : out.samples()) v = static_cast<float>(param * v);
      break;
    case IntensityOp::gaussian_blur:
      out = gaussian_blur(img, param);
      break;
    case IntensityOp::gaussian_noise:
      return add_gaussian_noise(img, param, plan.seed);
    case IntensityOp::gamma:
      for (float& v : out.samples()) v = static_cast<float>(std::pow(static_cast<double>(v), param));
      break;
  }
  clamp_unit(out);
  return out;
}

}  // namespace nucleikit
