// Raster data model shared by every nucleikit module: probability rasters,
// binary masks, instance label maps and the pipeline configuration.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nucleikit {

/// Base class of every runtime error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File contents violate the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

enum class Connectivity : int { four = 4, eight = 8 };

/// Row-major single-channel grid.  Used as BinaryMask (0/1 bytes) and
/// LabelMap (32-bit instance ids, 0 = background).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    check_dims(width, height);
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Grid(int width, int height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width, height);
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw std::invalid_argument("grid: value count " + std::to_string(values_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
  T& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
  T operator[](std::size_t i) const noexcept { return values_[i]; }
  T& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const T> values() const noexcept { return values_; }
  std::span<T> values() noexcept { return values_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("grid: dimensions must be positive, got " +
                                  std::to_string(width) + "x" + std::to_string(height));
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using BinaryMask = Grid<std::uint8_t>;
using LabelMap = Grid<std::uint32_t>;

/// Multi-channel float image, channel-planar and row-major within a channel.
class Raster {
 public:
  Raster() = default;

  Raster(int width, int height, int channels = 1, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    check_dims();
    samples_.assign(plane_size() * static_cast<std::size_t>(channels), fill);
  }

  Raster(int width, int height, int channels, std::vector<float> samples)
      : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
    check_dims();
    if (samples_.size() != plane_size() * static_cast<std::size_t>(channels)) {
      throw std::invalid_argument("raster: sample count " + std::to_string(samples_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height) + "x" + std::to_string(channels));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return samples_.empty(); }

  float operator()(int x, int y, int c = 0) const noexcept { return samples_[offset(x, y, c)]; }
  float& operator()(int x, int y, int c = 0) noexcept { return samples_[offset(x, y, c)]; }

  std::span<const float> samples() const noexcept { return samples_; }
  std::span<float> samples() noexcept { return samples_; }

  std::span<const float> channel(int c) const noexcept {
    return std::span<const float>(samples_).subspan(plane_size() * static_cast<std::size_t>(c), plane_size());
  }
  std::span<float> channel(int c) noexcept {
    return std::span<float>(samples_).subspan(plane_size() * static_cast<std::size_t>(c), plane_size());
  }

  template <typename U>
  bool same_shape(const Grid<U>& g) const noexcept {
    return width_ == g.width() && height_ == g.height();
  }
  bool same_shape(const Raster& r) const noexcept {
    return width_ == r.width_ && height_ == r.height_;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t offset(int x, int y, int c) const noexcept {
    return plane_size() * static_cast<std::size_t>(c) +
           static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  void check_dims() const {
    if (width_ <= 0 || height_ <= 0 || channels_ <= 0) {
      throw std::invalid_argument("raster: dimensions must be positive, got " +
                                  std::to_string(width_) + "x" + std::to_string(height_) + "x" +
                                  std::to_string(channels_));
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> samples_;
};

/// Throws if any sample is NaN or infinite.
inline void require_finite(const Raster& r) {
  const auto s = r.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) {
      throw std::invalid_argument("non-finite sample at index " + std::to_string(i));
    }
  }
}

/// Throws unless every sample lies in [0,1].  With `softmax` the per-pixel
/// channel sums must also be within 1e-4 of one.
inline void require_probability(const Raster& r, bool softmax = false) {
  require_finite(r);
  const auto s = r.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0f || s[i] > 1.0f) {
      throw std::invalid_argument("probability sample outside [0,1] at index " + std::to_string(i));
    }
  }
  if (!softmax) return;
  const std::size_t n = r.plane_size();
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0.0;
    for (int c = 0; c < r.channels(); ++c) sum += s[p + n * static_cast<std::size_t>(c)];
    if (std::abs(sum - 1.0) > 1e-4) {
      throw std::invalid_argument("channel sum " + std::to_string(sum) + " at pixel " +
                                  std::to_string(p) + " is not normalized");
    }
  }
}

/// Relabels positive labels to 1..K in raster order of first appearance.
inline LabelMap canonicalize(const LabelMap& labels) {
  if (labels.empty()) return labels;
  LabelMap out(labels.width(), labels.height());
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t l = labels[i];
    if (l == 0) continue;
    auto [it, inserted] = remap.try_emplace(l, next + 1);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

inline bool is_canonical(const LabelMap& labels) {
  std::uint32_t max_seen = 0;
  for (const std::uint32_t l : labels.values()) {
    if (l == 0 || l <= max_seen) continue;
    if (l != max_seen + 1) return false;
    max_seen = l;
  }
  return true;
}

/// Number of distinct positive labels.
inline std::size_t count_instances(const LabelMap& labels) {
  std::vector<std::uint32_t> ids;
  for (const std::uint32_t l : labels.values())
    if (l != 0) ids.push_back(l);
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

inline BinaryMask foreground(const LabelMap& labels) {
  BinaryMask m(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] != 0 ? 1 : 0;
  return m;
}

inline std::size_t count_foreground(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

// ---------------------------------------------------------------------------
// Pipeline configuration

enum class FloodSurface { distance, probability };
enum class CenterBorderMode { two_maps, argmax };
enum class InstanceAveraging { ground_truth, prediction };

/// Every tunable of the segmentation and evaluation pipelines.
struct PipelineConfig {
  double threshold = 0.5;
  int erosion_radius = 3;
  int min_instance_area = 20;
  Connectivity connectivity = Connectivity::eight;
  double coverage_fraction = 0.2;
  double match_iou = 0.5;
  FloodSurface flood_surface = FloodSurface::distance;
  CenterBorderMode center_border = CenterBorderMode::two_maps;
  InstanceAveraging dice_average = InstanceAveraging::ground_truth;

  void validate() const {
    auto open_unit = [](double v) { return std::isfinite(v) && v > 0.0 && v < 1.0; };
    if (!open_unit(threshold)) throw std::invalid_argument("threshold must lie in (0,1)");
    if (erosion_radius < 0) throw std::invalid_argument("erosion_radius must be >= 0");
    if (min_instance_area < 0) throw std::invalid_argument("min_instance_area must be >= 0");
    if (connectivity != Connectivity::four && connectivity != Connectivity::eight)
      throw std::invalid_argument("connectivity must be 4 or 8");
    if (!open_unit(coverage_fraction)) throw std::invalid_argument("coverage_fraction must lie in (0,1)");
    if (!open_unit(match_iou)) throw std::invalid_argument("match_iou must lie in (0,1)");
  }

  /// Sets one field from its textual form.  Does not validate ranges.
  void set(std::string_view key, std::string_view value) {
    const std::string v(value);
    auto to_double = [&]() {
      std::size_t used = 0;
      double d = 0.0;
      try {
        d = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || v.empty())
        throw std::invalid_argument("config: '" + std::string(key) + "' expects a number, got '" + v + "'");
      return d;
    };
    auto to_int = [&]() {
      const double d = to_double();
      if (d != std::floor(d) || std::abs(d) > 1e9)
        throw std::invalid_argument("config: '" + std::string(key) + "' expects an integer, got '" + v + "'");
      return static_cast<int>(d);
    };
    if (key == "threshold") {
      threshold = to_double();
    } else if (key == "erosion_radius") {
      erosion_radius = to_int();
    } else if (key == "min_instance_area") {
      min_instance_area = to_int();
    } else if (key == "connectivity") {
      const int c = to_int();
      if (c != 4 && c != 8) throw std::invalid_argument("connectivity must be 4 or 8");
      connectivity = static_cast<Connectivity>(c);
    } else if (key == "coverage_fraction") {
      coverage_fraction = to_double();
    } else if (key == "match_iou") {
      match_iou = to_double();
    } else if (key == "flood_surface") {
      if (v == "distance") flood_surface = FloodSurface::distance;
      else if (v == "probability") flood_surface = FloodSurface::probability;
      else throw std::invalid_argument("flood_surface must be distance or probability");
    } else if (key == "center_border") {
      if (v == "two_maps") center_border = CenterBorderMode::two_maps;
      else if (v == "argmax") center_border = CenterBorderMode::argmax;
      else throw std::invalid_argument("center_border must be two_maps or argmax");
    } else if (key == "dice_average") {
      if (v == "gt") dice_average = InstanceAveraging::ground_truth;
      else if (v == "pred") dice_average = InstanceAveraging::prediction;
      else throw std::invalid_argument("dice_average must be gt or pred");
    } else {
      throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
    }
  }

  /// Resolved key/value pairs in a fixed order, for manifests.
  std::vector<std::pair<std::string, std::string>> entries() const {
    auto num = [](double d) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", d);
      return std::string(buf);
    };
    return {
        {"threshold", num(threshold)},
        {"erosion_radius", std::to_string(erosion_radius)},
        {"min_instance_area", std::to_string(min_instance_area)},
        {"connectivity", std::to_string(static_cast<int>(connectivity))},
        {"coverage_fraction", num(coverage_fraction)},
        {"match_iou", num(match_iou)},
        {"flood_surface", flood_surface == FloodSurface::distance ? "distance" : "probability"},
        {"center_border", center_border == CenterBorderMode::two_maps ? "two_maps" : "argmax"},
        {"dice_average", dice_average == InstanceAveraging::ground_truth ? "gt" : "pred"},
    };
  }
};

/// Reads `key = value` lines ('#' starts a comment) on top of `base`, then
/// validates the result.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig base = {}) {
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    base.set(trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  base.validate();
  return base;
}

}  // namespace nucleikit
