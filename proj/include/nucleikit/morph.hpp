// Binary raster kernels: thresholding, disk erosion/dilation, connected
// component labeling, exact Euclidean distance transform, geodesic label
// propagation and marker-controlled watershed.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "nucleikit/core.hpp"

namespace nucleikit {

namespace detail {

struct Offset {
  int dx;
  int dy;
};

// Neighbour offsets ordered W, N, E, S, then the diagonals.
inline constexpr std::array<Offset, 8> kNeighbours = {{
    {-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {1, -1}, {-1, 1}, {1, 1},
}};

inline std::size_t neighbour_count(Connectivity c) { return c == Connectivity::four ? 4 : 8; }

}  // namespace detail

/// Disk of integer radius: offsets with dx^2 + dy^2 <= r^2.  Radius 0 is the
/// single pixel, radius 1 the 4-connected cross.
struct StructuringElement {
  int radius = 0;

  static StructuringElement disk(int radius) {
    if (radius < 0) throw std::invalid_argument("structuring element radius must be >= 0");
    return StructuringElement{radius};
  }

  /// Largest |dx| allowed on row dy, for |dy| <= radius.
  int half_width(int dy) const noexcept {
    const long long rem = static_cast<long long>(radius) * radius - static_cast<long long>(dy) * dy;
    int w = static_cast<int>(std::sqrt(static_cast<double>(rem)));
    while (static_cast<long long>(w + 1) * (w + 1) <= rem) ++w;
    while (static_cast<long long>(w) * w > rem) --w;
    return w;
  }

  std::vector<detail::Offset> offsets() const {
    std::vector<detail::Offset> out;
    for (int dy = -radius; dy <= radius; ++dy) {
      const int w = half_width(dy);
      for (int dx = -w; dx <= w; ++dx) out.push_back({dx, dy});
    }
    return out;
  }
};

/// Foreground iff sample >= t.
inline BinaryMask threshold(const Raster& prob, double t) {
  if (prob.channels() != 1)
    throw std::invalid_argument("threshold: expected a single-channel raster, got " +
                                std::to_string(prob.channels()) + " channels");
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("threshold: t must lie in (0,1)");
  BinaryMask m(prob.width(), prob.height());
  const auto s = prob.samples();
  for (std::size_t i = 0; i < s.size(); ++i) m[i] = static_cast<double>(s[i]) >= t ? 1 : 0;
  return m;
}

namespace detail {

// Per-row prefix counts of foreground: (width + 1) entries per row.
inline std::vector<int> row_prefix_counts(const BinaryMask& m) {
  const int w = m.width();
  std::vector<int> pre(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(m.height()), 0);
  for (int y = 0; y < m.height(); ++y) {
    int* row = pre.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w + 1);
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (m(x, y) ? 1 : 0);
  }
  return pre;
}

}  // namespace detail

/// Pixel survives iff every disk offset lands on foreground.  Pixels outside
/// the image count as background.
inline BinaryMask erode(const BinaryMask& m, StructuringElement se) {
  if (se.radius == 0) return m;
  const int w = m.width();
  const int h = m.height();
  const auto pre = detail::row_prefix_counts(m);
  std::vector<int> spans(static_cast<std::size_t>(2 * se.radius + 1));
  for (int dy = -se.radius; dy <= se.radius; ++dy) spans[static_cast<std::size_t>(dy + se.radius)] = se.half_width(dy);

  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    if (y - se.radius < 0 || y + se.radius >= h) continue;
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      bool keep = true;
      for (int dy = -se.radius; dy <= se.radius && keep; ++dy) {
        const int hw = spans[static_cast<std::size_t>(dy + se.radius)];
        if (x - hw < 0 || x + hw >= w) {
          keep = false;
          break;
        }
        const int* row = pre.data() + static_cast<std::size_t>(y + dy) * static_cast<std::size_t>(w + 1);
        keep = row[x + hw + 1] - row[x - hw] == 2 * hw + 1;
      }
      out(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

/// Pixel set iff any disk offset hits foreground.
inline BinaryMask dilate(const BinaryMask& m, StructuringElement se) {
  if (se.radius == 0) return m;
  const int w = m.width();
  const int h = m.height();
  const auto pre = detail::row_prefix_counts(m);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -se.radius; dy <= se.radius && !hit; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int hw = se.half_width(dy);
        const int lo = std::max(0, x - hw);
        const int hi = std::min(w - 1, x + hw);
        const int* row = pre.data() + static_cast<std::size_t>(yy) * static_cast<std::size_t>(w + 1);
        hit = row[hi + 1] - row[lo] > 0;
      }
      out(x, y) = hit ? 1 : 0;
    }
  }
  return out;
}

/// Two-pass union-find labeling.  Output is canonical: labels 1..K assigned
/// in raster order of each component's first pixel.
inline LabelMap label_components(const BinaryMask& m, Connectivity connectivity = Connectivity::eight) {
  const int w = m.width();
  const int h = m.height();
  LabelMap provisional(w, h);
  std::vector<std::uint32_t> parent{0};

  auto find = [&parent](std::uint32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  auto unite = [&](std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a < b) parent[b] = a;
    else if (b < a) parent[a] = b;
  };

  // Already-visited neighbours: W, N, and for 8-connectivity NW, NE.
  static constexpr std::array<detail::Offset, 4> kPrior = {{{-1, 0}, {0, -1}, {-1, -1}, {1, -1}}};
  const std::size_t prior = connectivity == Connectivity::four ? 2 : 4;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      std::uint32_t label = 0;
      for (std::size_t k = 0; k < prior; ++k) {
        const int nx = x + kPrior[k].dx;
        const int ny = y + kPrior[k].dy;
        if (!m.contains(nx, ny)) continue;
        const std::uint32_t nl = provisional(nx, ny);
        if (nl == 0) continue;
        if (label == 0) label = nl;
        else if (nl != label) unite(label, nl);
      }
      if (label == 0) {
        label = static_cast<std::uint32_t>(parent.size());
        parent.push_back(label);
      }
      provisional(x, y) = label;
    }
  }

  std::vector<std::uint32_t> final_id(parent.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] == 0) continue;
    const std::uint32_t root = find(provisional[i]);
    if (final_id[root] == 0) final_id[root] = ++next;
    provisional[i] = final_id[root];
  }
  return provisional;
}

namespace detail {

// Lower envelope of parabolas; f holds squared distances (large value for
// "no site").  Writes the 1-D squared distance transform of f into d.
inline void squared_edt_1d(const double* f, int n, double* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [f](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = static_cast<double>(q - v[k]);
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from each foreground pixel to the nearest
/// background pixel; the ring of pixels outside the image counts as
/// background.  Background pixels are 0.  Linear time.
inline Grid<double> squared_distance_transform(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  const int pw = w + 2;
  const int ph = h + 2;
  constexpr double kFar = 1e20;
  std::vector<double> grid(static_cast<std::size_t>(pw) * static_cast<std::size_t>(ph), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m(x, y)) grid[static_cast<std::size_t>(y + 1) * pw + static_cast<std::size_t>(x + 1)] = kFar;

  const int longest = std::max(pw, ph);
  std::vector<double> f(static_cast<std::size_t>(longest));
  std::vector<double> d(static_cast<std::size_t>(longest));
  std::vector<int> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest) + 1);

  for (int x = 1; x <= w; ++x) {
    for (int y = 0; y < ph; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * pw + static_cast<std::size_t>(x)];
    detail::squared_edt_1d(f.data(), ph, d.data(), v.data(), z.data());
    for (int y = 0; y < ph; ++y) grid[static_cast<std::size_t>(y) * pw + static_cast<std::size_t>(x)] = d[static_cast<std::size_t>(y)];
  }
  Grid<double> out(w, h);
  for (int y = 1; y <= h; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * pw;
    detail::squared_edt_1d(row, pw, d.data(), v.data(), z.data());
    for (int x = 1; x <= w; ++x) out(x - 1, y - 1) = m(x - 1, y - 1) ? d[static_cast<std::size_t>(x)] : 0.0;
  }
  return out;
}

inline Raster distance_transform(const BinaryMask& m) {
  const Grid<double> sq = squared_distance_transform(m);
  Raster out(m.width(), m.height());
  auto s = out.samples();
  for (std::size_t i = 0; i < sq.size(); ++i) s[i] = static_cast<float>(std::sqrt(sq[i]));
  return out;
}

/// Multi-source breadth-first growth of `seeds` through `region`.  Each
/// reachable region pixel takes the label of its geodesically nearest seed
/// (ties go to the smaller label); unreachable pixels stay 0.
inline LabelMap propagate_labels(const LabelMap& seeds, const BinaryMask& region,
                                 Connectivity connectivity = Connectivity::eight) {
  if (!seeds.same_shape(region)) throw std::invalid_argument("propagate_labels: seeds and region differ in shape");
  const int w = region.width();
  LabelMap out = seeds;
  std::vector<std::uint32_t> frontier;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i] == 0) continue;
    if (!region[i]) {
      throw std::invalid_argument("propagate_labels: seed outside region at (" +
                                  std::to_string(i % static_cast<std::size_t>(w)) + "," +
                                  std::to_string(i / static_cast<std::size_t>(w)) + ")");
    }
    frontier.push_back(static_cast<std::uint32_t>(i));
  }

  // Pixels reached in the current wave may still switch to a smaller label
  // offered by another frontier pixel of the same wave.
  std::vector<std::uint8_t> settled(region.size(), 0);
  for (const auto i : frontier) settled[i] = 1;
  const std::size_t nn = detail::neighbour_count(connectivity);
  std::vector<std::uint32_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (const std::uint32_t i : frontier) {
      const int x = static_cast<int>(i % static_cast<std::uint32_t>(w));
      const int y = static_cast<int>(i / static_cast<std::uint32_t>(w));
      const std::uint32_t label = out[i];
      for (std::size_t k = 0; k < nn; ++k) {
        const int nx = x + detail::kNeighbours[k].dx;
        const int ny = y + detail::kNeighbours[k].dy;
        if (!region.contains(nx, ny)) continue;
        const std::size_t j = region.index(nx, ny);
        if (!region[j] || settled[j] == 1) continue;
        if (settled[j] == 0) {
          settled[j] = 2;
          out[j] = label;
          next.push_back(static_cast<std::uint32_t>(j));
        } else if (label < out[j]) {
          out[j] = label;
        }
      }
    }
    for (const auto j : next) settled[j] = 1;
    frontier.swap(next);
  }
  return out;
}

struct WatershedResult {
  LabelMap labels;
  std::size_t unreachable_pixels = 0;
  /// Region was non-empty but no marker was supplied.
  bool no_markers = false;
};

/// Marker-controlled flooding of `region`: pixels with higher `surface`
/// values are claimed first.  A pixel reachable from several labels takes
/// the one offered by its highest-surface labeled neighbour; remaining ties
/// go by step distance across a plateau of equal values, then smaller
/// label, then raster order.  Output keeps the
/// marker labels; region pixels no marker can reach are 0.
inline WatershedResult watershed_split(const BinaryMask& region, const LabelMap& markers, const Raster& surface,
                                       Connectivity connectivity = Connectivity::eight) {
  if (!markers.same_shape(region) || !surface.same_shape(region))
    throw std::invalid_argument("watershed_split: inputs differ in shape");
  if (surface.channels() != 1) throw std::invalid_argument("watershed_split: surface must be single-channel");
  require_finite(surface);

  struct Entry {
    float key;     // negated surface value
    float parent;  // negated surface value of the claiming neighbour
    std::uint32_t plateau;
    std::uint32_t label;
    std::uint32_t index;
    bool operator>(const Entry& o) const noexcept {
      if (key != o.key) return key > o.key;
      if (parent != o.parent) return parent > o.parent;
      if (plateau != o.plateau) return plateau > o.plateau;
      if (label != o.label) return label > o.label;
      return index > o.index;
    }
  };

  const int w = region.width();
  const auto s = surface.samples();
  WatershedResult result;
  result.labels = LabelMap(region.width(), region.height());
  LabelMap& out = result.labels;
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  // Plateau distance of each claimed pixel, and the best claim queued so far
  // per pixel; a push that cannot beat it is skipped.
  std::vector<std::uint32_t> plateau(region.size(), 0);
  std::vector<float> queued_parent(region.size(), std::numeric_limits<float>::infinity());
  std::vector<std::uint32_t> queued_plateau(region.size(), kNone);
  std::vector<std::uint32_t> queued_label(region.size(), kNone);
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  const std::size_t nn = detail::neighbour_count(connectivity);

  auto push_neighbours = [&](std::size_t i, std::uint32_t label) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (std::size_t k = 0; k < nn; ++k) {
      const int nx = x + detail::kNeighbours[k].dx;
      const int ny = y + detail::kNeighbours[k].dy;
      if (!region.contains(nx, ny)) continue;
      const std::size_t j = region.index(nx, ny);
      if (!region[j] || out[j] != 0) continue;
      const float parent = -s[i];
      const std::uint32_t p = s[j] == s[i] ? plateau[i] + 1 : 0;
      if (std::tie(parent, p, label) >= std::tie(queued_parent[j], queued_plateau[j], queued_label[j])) continue;
      queued_parent[j] = parent;
      queued_plateau[j] = p;
      queued_label[j] = label;
      heap.push(Entry{-s[j], parent, p, label, static_cast<std::uint32_t>(j)});
    }
  };

  bool any_marker = false;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i] == 0) continue;
    if (!region[i]) {
      throw std::invalid_argument("watershed_split: marker outside region at index " + std::to_string(i));
    }
    out[i] = markers[i];
    any_marker = true;
  }
  for (std::size_t i = 0; i < markers.size(); ++i)
    if (markers[i] != 0) push_neighbours(i, markers[i]);

  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    if (out[e.index] != 0) continue;
    out[e.index] = e.label;
    plateau[e.index] = e.plateau;
    push_neighbours(e.index, e.label);
  }

  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i] && out[i] == 0) ++result.unreachable_pixels;
  result.no_markers = !any_marker && result.unreachable_pixels > 0;
  return result;
}

}  // namespace nucleikit
