// Float raster filters shared by augmentation and the synthetic scene
// generator.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nucleikit/core.hpp"
#include "nucleikit/rng.hpp"

namespace nucleikit {

/// Normalized Gaussian taps, truncated at ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

// Mirror index into [0, n) with the edge sample repeated (c b a | a b c | c b a).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace detail

/// Separable Gaussian blur of every channel with reflect padding.
inline Raster gaussian_blur(const Raster& in, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = in.width();
  const int h = in.height();
  Raster out(w, h, in.channels());
  std::vector<double> tmp(in.plane_size());
  for (int c = 0; c < in.channels(); ++c) {
    const auto src = in.channel(c);
    auto dst = out.channel(c);
    for (int y = 0; y < h; ++y) {
      const float* row = src.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] * row[detail::reflect_index(x + t, w)];
        tmp[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] *
                 tmp[static_cast<std::size_t>(detail::reflect_index(y + t, h)) * static_cast<std::size_t>(w) +
                     static_cast<std::size_t>(x)];
        dst[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] =
            static_cast<float>(acc);
      }
    }
  }
  return out;
}

inline void clamp_unit(Raster& r) {
  for (float& v : r.samples()) v = std::clamp(v, 0.0f, 1.0f);
}

/// Adds N(0, sigma^2) noise drawn from `seed` in sample order, then clamps
/// to [0,1].
inline Raster add_gaussian_noise(const Raster& in, double sigma, std::uint64_t seed) {
  Raster out = in;
  if (sigma > 0.0) {
    Rng rng(seed);
    for (float& v : out.samples()) v = static_cast<float>(static_cast<double>(v) + sigma * rng.normal());
  }
  clamp_unit(out);
  return out;
}

}  // namespace nucleikit
