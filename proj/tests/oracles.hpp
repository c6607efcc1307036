// Brute-force reference implementations used as test oracles.  Deliberately
// naive: no shared code with the library beyond the data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "nucleikit/core.hpp"

namespace oracle {

using nucleikit::BinaryMask;
using nucleikit::Connectivity;
using nucleikit::LabelMap;

inline std::vector<std::pair<int, int>> steps(Connectivity c) {
  std::vector<std::pair<int, int>> s = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  if (c == Connectivity::eight) s.insert(s.end(), {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}});
  return s;
}

/// Flood-fill labeling, labels in raster order of the first pixel.
inline LabelMap flood_fill_labels(const BinaryMask& m, Connectivity c) {
  LabelMap out(m.width(), m.height());
  std::uint32_t next = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y) || out(x, y)) continue;
      ++next;
      std::vector<std::pair<int, int>> stack = {{x, y}};
      out(x, y) = next;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (auto [dx, dy] : steps(c)) {
          const int nx = cx + dx, ny = cy + dy;
          if (m.contains(nx, ny) && m(nx, ny) && !out(nx, ny)) {
            out(nx, ny) = next;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  return out;
}

/// Distance to the nearest background pixel, where every pixel of the
/// one-pixel ring around the image is background.
inline std::vector<double> brute_force_edt(const BinaryMask& m) {
  std::vector<std::pair<int, int>> bg;
  for (int y = -1; y <= m.height(); ++y)
    for (int x = -1; x <= m.width(); ++x)
      if (!m.contains(x, y) || !m(x, y)) bg.push_back({x, y});
  std::vector<double> d(m.size(), 0.0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (auto [bx, by] : bg) best = std::min(best, std::hypot(double(x - bx), double(y - by)));
      d[m.index(x, y)] = best;
    }
  return d;
}

/// Per-pixel disk test: survives iff every pixel within radius is inside
/// the image and foreground.
inline BinaryMask brute_force_erode(const BinaryMask& m, int r) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool ok = m(x, y) != 0;
      for (int dy = -r; dy <= r && ok; ++dy)
        for (int dx = -r; dx <= r && ok; ++dx)
          if (dx * dx + dy * dy <= r * r) ok = m.contains(x + dx, y + dy) && m(x + dx, y + dy);
      out(x, y) = ok;
    }
  return out;
}

inline BinaryMask brute_force_dilate(const BinaryMask& m, int r) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool hit = false;
      for (int dy = -r; dy <= r && !hit; ++dy)
        for (int dx = -r; dx <= r && !hit; ++dx)
          if (dx * dx + dy * dy <= r * r) hit = m.contains(x + dx, y + dy) && m(x + dx, y + dy);
      out(x, y) = hit;
    }
  return out;
}

/// BFS distance inside `region` from every seed pixel of each label
/// separately; each region pixel takes the label with the smallest distance
/// (smaller label on ties).
inline LabelMap geodesic_nearest_seed(const LabelMap& seeds, const BinaryMask& region, Connectivity c) {
  constexpr int kInf = std::numeric_limits<int>::max();
  std::set<std::uint32_t> labels;
  for (auto l : seeds.values())
    if (l) labels.insert(l);
  LabelMap out(seeds.width(), seeds.height());
  std::vector<int> best(seeds.size(), kInf);
  for (const std::uint32_t l : labels) {
    std::vector<int> dist(seeds.size(), kInf);
    std::deque<std::pair<int, int>> q;
    for (int y = 0; y < seeds.height(); ++y)
      for (int x = 0; x < seeds.width(); ++x)
        if (seeds(x, y) == l) {
          dist[seeds.index(x, y)] = 0;
          q.push_back({x, y});
        }
    while (!q.empty()) {
      auto [x, y] = q.front();
      q.pop_front();
      for (auto [dx, dy] : steps(c)) {
        const int nx = x + dx, ny = y + dy;
        if (!region.contains(nx, ny) || !region(nx, ny)) continue;
        const std::size_t ni = region.index(nx, ny);
        if (dist[ni] != kInf) continue;
        dist[ni] = dist[region.index(x, y)] + 1;
        q.push_back({nx, ny});
      }
    }
    for (std::size_t i = 0; i < seeds.size(); ++i)
      if (dist[i] < best[i]) {  // labels visited ascending: ties keep the smaller
        best[i] = dist[i];
        out[i] = l;
      }
  }
  return out;
}

/// Two label maps describe the same pixel partition.
inline bool same_partition(const LabelMap& a, const LabelMap& b) {
  if (!a.same_shape(b)) return false;
  std::map<std::uint32_t, std::uint32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

/// Every positive label's pixel set is connected.
inline bool labels_connected(const LabelMap& m, Connectivity c) {
  std::set<std::uint32_t> labels;
  for (auto l : m.values())
    if (l) labels.insert(l);
  for (const std::uint32_t l : labels) {
    BinaryMask own(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) own[i] = m[i] == l;
    const LabelMap comp = flood_fill_labels(own, c);
    for (auto v : comp.values())
      if (v > 1) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Instance matching

struct PairStats {
  std::map<std::uint32_t, std::uint64_t> gt_area, pred_area;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> inter;  // (gt, pred)

  double iou(std::uint32_t g, std::uint32_t p) const {
    const auto it = inter.find({g, p});
    const double i = it == inter.end() ? 0.0 : double(it->second);
    return i / (double(gt_area.at(g)) + double(pred_area.at(p)) - i);
  }
  std::uint64_t overlap(std::uint32_t g, std::uint32_t p) const {
    const auto it = inter.find({g, p});
    return it == inter.end() ? 0 : it->second;
  }
};

inline PairStats pair_stats(const LabelMap& pred, const LabelMap& gt) {
  PairStats s;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i]) ++s.gt_area[gt[i]];
    if (pred[i]) ++s.pred_area[pred[i]];
    if (gt[i] && pred[i]) ++s.inter[{gt[i], pred[i]}];
  }
  return s;
}

/// Exhaustive one-to-one assignment maximizing the total IoU over pairs with
/// IoU >= threshold.  Returns the matched (gt, pred) set.
inline std::set<std::pair<std::uint32_t, std::uint32_t>> optimal_matching(const PairStats& s, double threshold) {
  std::vector<std::uint32_t> gts, preds;
  for (auto& [g, a] : s.gt_area) gts.push_back(g);
  for (auto& [p, a] : s.pred_area) preds.push_back(p);
  std::set<std::pair<std::uint32_t, std::uint32_t>> best_set, cur;
  double best = -1.0;
  std::vector<bool> used(preds.size(), false);
  auto rec = [&](auto&& self, std::size_t gi, double total) -> void {
    if (gi == gts.size()) {
      if (total > best + 1e-12) {
        best = total;
        best_set = cur;
      }
      return;
    }
    self(self, gi + 1, total);
    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      if (used[pi]) continue;
      const double v = s.iou(gts[gi], preds[pi]);
      if (v < threshold) continue;
      used[pi] = true;
      cur.insert({gts[gi], preds[pi]});
      self(self, gi + 1, total + v);
      cur.erase({gts[gi], preds[pi]});
      used[pi] = false;
    }
  };
  rec(rec, 0, 0.0);
  return best_set;
}

/// Random label map with up to `max_instances` axis-aligned rectangles
/// painted in order (later rectangles overwrite earlier ones).
template <typename Engine>
LabelMap random_rect_labels(Engine& rng, int w, int h, int max_instances) {
  LabelMap m(w, h);
  std::uniform_int_distribution<int> count(0, max_instances);
  const int n = count(rng);
  for (int k = 1; k <= n; ++k) {
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m(x, y) = static_cast<std::uint32_t>(k);
  }
  return nucleikit::canonicalize(m);
}

/// Copy of `m` with each instance shifted by up to `jitter` pixels and
/// labels permuted; models an imperfect prediction.
template <typename Engine>
LabelMap perturb_labels(Engine& rng, const LabelMap& m, int jitter) {
  std::map<std::uint32_t, std::pair<int, int>> shift;
  std::uniform_int_distribution<int> d(-jitter, jitter);
  for (auto l : m.values())
    if (l && !shift.count(l)) shift[l] = {d(rng), d(rng)};
  LabelMap out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const std::uint32_t l = m(x, y);
      if (!l) continue;
      const int nx = x + shift[l].first, ny = y + shift[l].second;
      if (out.contains(nx, ny)) out(nx, ny) = l * 7 + 3;
    }
  return out;
}

}  // namespace oracle
