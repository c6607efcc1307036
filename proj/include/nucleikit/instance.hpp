// Instance segmentation from semantic probability maps.
//
// Watershed strategy: threshold the whole-nucleus map, erode, take the eroded
// components as markers and flood the thresholded mask from them.
//
// Centre/border strategy: threshold a centre map and a border map, label the
// centre components and grow them through centre-or-border pixels.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nucleikit/core.hpp"
#include "nucleikit/morph.hpp"

namespace nucleikit {

struct SegmentationResult {
  LabelMap labels;
  std::size_t instance_count = 0;
  std::size_t dropped_small = 0;
  std::size_t unreachable_pixels = 0;
};

/// Zeroes instances with fewer than `min_area` pixels and canonicalizes.
inline LabelMap filter_small_instances(const LabelMap& labels, int min_area, std::size_t* dropped = nullptr) {
  std::vector<std::size_t> area;
  for (const std::uint32_t l : labels.values()) {
    if (l >= area.size()) area.resize(static_cast<std::size_t>(l) + 1, 0);
    ++area[l];
  }
  std::size_t removed = 0;
  for (std::size_t l = 1; l < area.size(); ++l)
    if (area[l] > 0 && area[l] < static_cast<std::size_t>(min_area)) ++removed;
  if (dropped) *dropped = removed;
  if (removed == 0) return canonicalize(labels);
  LabelMap kept = labels;
  for (std::uint32_t& l : kept.values())
    if (l != 0 && area[l] < static_cast<std::size_t>(min_area)) l = 0;
  return canonicalize(kept);
}

namespace detail {

inline SegmentationResult finish(const LabelMap& grown, std::size_t unreachable, const PipelineConfig& cfg) {
  SegmentationResult r;
  r.labels = filter_small_instances(grown, cfg.min_instance_area, &r.dropped_small);
  r.instance_count = count_instances(r.labels);
  r.unreachable_pixels = unreachable;
  return r;
}

inline void require_single_probability(const Raster& r, const char* what) {
  if (r.channels() != 1) throw std::invalid_argument(std::string(what) + ": expected a single-channel map");
  require_probability(r);
}

}  // namespace detail

inline SegmentationResult segment_watershed(const Raster& prob, const PipelineConfig& cfg) {
  cfg.validate();
  detail::require_single_probability(prob, "segment_watershed");
  const BinaryMask mask = threshold(prob, cfg.threshold);
  const BinaryMask eroded = erode(mask, StructuringElement::disk(cfg.erosion_radius));
  const LabelMap markers = label_components(eroded, cfg.connectivity);
  const Raster surface = cfg.flood_surface == FloodSurface::distance ? distance_transform(mask) : prob;
  const WatershedResult flooded = watershed_split(mask, markers, surface, cfg.connectivity);
  return detail::finish(flooded.labels, flooded.unreachable_pixels, cfg);
}

inline SegmentationResult segment_cca(const Raster& center_prob, const Raster& border_prob,
                                      const PipelineConfig& cfg) {
  cfg.validate();
  if (!center_prob.same_shape(border_prob))
    throw std::invalid_argument("segment_cca: centre and border maps differ in shape");
  detail::require_single_probability(center_prob, "segment_cca centre map");
  detail::require_single_probability(border_prob, "segment_cca border map");
  const BinaryMask center = threshold(center_prob, cfg.threshold);
  BinaryMask region = threshold(border_prob, cfg.threshold);
  for (std::size_t i = 0; i < region.size(); ++i) region[i] = (region[i] || center[i]) ? 1 : 0;

  const LabelMap seeds = label_components(center, cfg.connectivity);
  const LabelMap grown = propagate_labels(seeds, region, cfg.connectivity);
  std::size_t unreachable = 0;
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i] && grown[i] == 0) ++unreachable;
  return detail::finish(grown, unreachable, cfg);
}

/// Splits a 3-channel (background, centre, border) softmax map into centre
/// and border indicator maps by per-pixel argmax; ties go to the lower
/// channel.
inline std::pair<Raster, Raster> split_softmax(const Raster& softmax) {
  if (softmax.channels() != 3)
    throw std::invalid_argument("split_softmax: expected 3 channels (background, centre, border)");
  require_probability(softmax, true);
  Raster center(softmax.width(), softmax.height());
  Raster border(softmax.width(), softmax.height());
  const auto bg = softmax.channel(0);
  const auto ce = softmax.channel(1);
  const auto bo = softmax.channel(2);
  for (std::size_t i = 0; i < softmax.plane_size(); ++i) {
    int best = 0;
    if (ce[i] > bg[i]) best = 1;
    if (bo[i] > (best == 1 ? ce[i] : bg[i])) best = 2;
    center.samples()[i] = best == 1 ? 1.0f : 0.0f;
    border.samples()[i] = best == 2 ? 1.0f : 0.0f;
  }
  return {std::move(center), std::move(border)};
}

inline SegmentationResult segment_cca_softmax(const Raster& softmax, const PipelineConfig& cfg) {
  const auto [center, border] = split_softmax(softmax);
  return segment_cca(center, border, cfg);
}

}  // namespace nucleikit
