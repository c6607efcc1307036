// Segmentation quality measures: pixel confusion metrics, the combined
// cross-entropy/soft-Dice loss and instance matching with
// extra/missed/over-split/under-split bookkeeping.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nucleikit/core.hpp"

namespace nucleikit {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("confusion: masks differ in shape");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 2tp / (2tp + fp + fn); two empty masks score 1.
inline double dice(const ConfusionCounts& c) noexcept {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

/// Pixel metric battery.  Ratios whose denominator is zero take a fixed
/// convention (1 for "nothing to get wrong" ratios, 0 for error rates) and
/// the metric name is recorded in `degenerate`.
struct MetricTable {
  double accuracy = 0;
  double dice = 0;
  double fdr = 0;
  double fnr = 0;
  double for_ = 0;
  double fpr = 0;
  double jaccard = 0;
  double npv = 0;
  double precision = 0;
  double recall = 0;
  double tnr = 0;
  std::uint64_t total_pos_reference = 0;
  std::uint64_t total_pos_test = 0;
  std::vector<std::string> degenerate;
};

inline MetricTable metric_table(const ConfusionCounts& c) {
  MetricTable t;
  auto ratio = [&t](std::uint64_t num, std::uint64_t den, double if_empty, const char* name) {
    if (den == 0) {
      t.degenerate.emplace_back(name);
      return if_empty;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  t.accuracy = ratio(c.tp + c.tn, c.total(), 1.0, "accuracy");
  t.precision = ratio(c.tp, c.tp + c.fp, 1.0, "precision");
  t.recall = ratio(c.tp, c.tp + c.fn, 1.0, "recall");
  t.npv = ratio(c.tn, c.fn + c.tn, 1.0, "npv");
  t.tnr = ratio(c.tn, c.fp + c.tn, 1.0, "tnr");
  t.fdr = ratio(c.fp, c.tp + c.fp, 0.0, "fdr");
  t.fnr = ratio(c.fn, c.tp + c.fn, 0.0, "fnr");
  t.for_ = ratio(c.fn, c.fn + c.tn, 0.0, "for");
  t.fpr = ratio(c.fp, c.fp + c.tn, 0.0, "fpr");
  t.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, 1.0, "dice");
  t.jaccard = ratio(c.tp, c.tp + c.fp + c.fn, 1.0, "jaccard");
  t.total_pos_reference = c.tp + c.fn;
  t.total_pos_test = c.tp + c.fp;
  return t;
}

// ---------------------------------------------------------------------------
// Combined loss

struct LossValue {
  double cross_entropy = 0;
  double soft_dice = 0;
  double combined = 0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// 0.5 * cross entropy + 0.5 * (1 - soft Dice).
///
/// `pred` holds per-class probabilities (C >= 2 channels summing to one), or
/// a single foreground-probability channel for a binary problem.  `gt` is the
/// one-hot truth with the same layout.  Soft Dice averages over the
/// foreground classes 1..C-1; a class absent from both maps scores 1.
inline LossValue combined_loss(const Raster& pred, const Raster& gt) {
  if (!pred.same_shape(gt) || pred.channels() != gt.channels())
    throw std::invalid_argument("combined_loss: prediction and truth differ in shape");
  require_probability(pred, pred.channels() > 1);
  require_probability(gt, gt.channels() > 1);

  const bool binary = pred.channels() == 1;
  const int classes = binary ? 2 : pred.channels();
  const std::size_t n = pred.plane_size();
  auto prob = [&](const Raster& r, int cls, std::size_t i) -> double {
    if (binary) return cls == 1 ? r.samples()[i] : 1.0 - r.samples()[i];
    return r.channel(cls)[i];
  };
  for (const float v : gt.samples())
    if (v != 0.0f && v != 1.0f) throw std::invalid_argument("combined_loss: truth is not one-hot");

  double ce = 0.0;
  std::vector<double> inter(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> psum(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> gsum(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int truth = -1;
    for (int c = 0; c < classes; ++c) {
      if (prob(gt, c, i) == 1.0) {
        if (truth >= 0) throw std::invalid_argument("combined_loss: truth is not one-hot");
        truth = c;
      }
    }
    if (truth < 0) throw std::invalid_argument("combined_loss: truth is not one-hot");
    ce -= std::log(std::clamp(prob(pred, truth, i), kProbabilityClamp, 1.0 - kProbabilityClamp));
    for (int c = 1; c < classes; ++c) {
      const double p = prob(pred, c, i);
      const double g = prob(gt, c, i);
      inter[static_cast<std::size_t>(c)] += p * g;
      psum[static_cast<std::size_t>(c)] += p;
      gsum[static_cast<std::size_t>(c)] += g;
    }
  }
  LossValue loss;
  loss.cross_entropy = ce / static_cast<double>(n);
  double dice_sum = 0.0;
  for (int c = 1; c < classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const double den = psum[k] + gsum[k];
    dice_sum += den == 0.0 ? 1.0 : 2.0 * inter[k] / den;
  }
  loss.soft_dice = dice_sum / static_cast<double>(classes - 1);
  loss.combined = 0.5 * loss.cross_entropy + 0.5 * (1.0 - loss.soft_dice);
  return loss;
}

// ---------------------------------------------------------------------------
// Instance matching

enum class GtCategory { matched, over_split, missed };
enum class PredCategory { matched, under_split, extra, absorbed };

inline const char* to_string(GtCategory c) {
  switch (c) {
    case GtCategory::matched: return "matched";
    case GtCategory::over_split: return "over_split";
    case GtCategory::missed: return "missed";
  }
  return "?";
}

inline const char* to_string(PredCategory c) {
  switch (c) {
    case PredCategory::matched: return "matched";
    case PredCategory::under_split: return "under_split";
    case PredCategory::extra: return "extra";
    case PredCategory::absorbed: return "absorbed";
  }
  return "?";
}

struct GtRecord {
  std::uint32_t gt_label = 0;
  std::uint64_t area = 0;
  /// Prediction with the largest overlap (higher Dice, then smaller label on
  /// ties).
  std::optional<std::uint32_t> best_pred_label;
  /// Dice against best_pred_label, 0 without overlap.
  double dice = 0;
  /// Greedy one-to-one partner, if any.
  std::optional<std::uint32_t> matched_pred_label;
  GtCategory category = GtCategory::missed;
};

struct PredRecord {
  std::uint32_t pred_label = 0;
  std::uint64_t area = 0;
  std::optional<std::uint32_t> best_gt_label;
  double dice = 0;
  std::optional<std::uint32_t> matched_gt_label;
  PredCategory category = PredCategory::extra;
};

struct MatchedPair {
  std::uint32_t gt_label = 0;
  std::uint32_t pred_label = 0;
  double iou = 0;
};

struct MatchReport {
  std::vector<GtRecord> gt;      // ascending gt_label
  std::vector<PredRecord> pred;  // ascending pred_label
  std::vector<MatchedPair> pairs;
  std::size_t matched = 0;
  std::size_t extra = 0;
  std::size_t missed = 0;
  std::size_t over_split = 0;
  std::size_t under_split = 0;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  /// Mean per-instance Dice under the configured averaging; undefined when
  /// the averaged set is empty.
  double mean_dice_per_instance = 0;
  bool mean_dice_defined = false;
  double mean_dice_over_gt = 0;
  double mean_dice_over_pred = 0;
  double relative_count = 0;
  bool relative_count_defined = false;
};

namespace detail {

struct Overlaps {
  std::map<std::uint32_t, std::uint64_t> gt_area;
  std::map<std::uint32_t, std::uint64_t> pred_area;
  std::unordered_map<std::uint64_t, std::uint64_t> inter;  // (gt << 32 | pred) -> count

  std::uint64_t intersection(std::uint32_t g, std::uint32_t p) const {
    const auto it = inter.find((std::uint64_t{g} << 32) | p);
    return it == inter.end() ? 0 : it->second;
  }
};

inline Overlaps overlaps(const LabelMap& pred, const LabelMap& gt) {
  Overlaps o;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint32_t g = gt[i];
    const std::uint32_t p = pred[i];
    if (g != 0) ++o.gt_area[g];
    if (p != 0) ++o.pred_area[p];
    if (g != 0 && p != 0) ++o.inter[(std::uint64_t{g} << 32) | p];
  }
  return o;
}

inline double pair_dice(std::uint64_t inter, std::uint64_t a, std::uint64_t b) {
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

inline double pair_iou(std::uint64_t inter, std::uint64_t a, std::uint64_t b) {
  return static_cast<double>(inter) / static_cast<double>(a + b - inter);
}

}  // namespace detail

/// Greedy one-to-one matching by descending IoU (pairs accepted at IoU >=
/// cfg.match_iou) followed by category assignment.
///
/// A GT is over-split when >= 2 predictions each cover >= coverage_fraction
/// of it; this takes precedence over a greedy match.  A prediction is
/// under-split when it covers >= coverage_fraction of >= 2 GT objects, extra
/// when unmatched and below coverage_fraction of every GT, and otherwise
/// absorbed unless it is the partner of a matched GT.
inline MatchReport match_instances(const LabelMap& pred, const LabelMap& gt, const PipelineConfig& cfg) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("match_instances: label maps differ in shape");
  const detail::Overlaps ov = detail::overlaps(pred, gt);

  MatchReport r;
  r.gt_count = ov.gt_area.size();
  r.pred_count = ov.pred_area.size();

  std::map<std::uint32_t, std::size_t> gt_pos;
  std::map<std::uint32_t, std::size_t> pred_pos;
  for (const auto& [g, area] : ov.gt_area) {
    gt_pos[g] = r.gt.size();
    r.gt.push_back(GtRecord{g, area, std::nullopt, 0.0, std::nullopt, GtCategory::missed});
  }
  for (const auto& [p, area] : ov.pred_area) {
    pred_pos[p] = r.pred.size();
    r.pred.push_back(PredRecord{p, area, std::nullopt, 0.0, std::nullopt, PredCategory::extra});
  }

  std::vector<MatchedPair> candidates;
  std::vector<std::size_t> gt_cover(r.gt.size(), 0);    // predictions covering >= fraction of the GT
  std::vector<std::size_t> pred_cover(r.pred.size(), 0);  // GTs covered >= fraction by the prediction
  std::vector<std::uint64_t> gt_best(r.gt.size(), 0);
  std::vector<std::uint64_t> pred_best(r.pred.size(), 0);
  std::vector<std::uint64_t> keys;
  keys.reserve(ov.inter.size());
  for (const auto& entry : ov.inter) keys.push_back(entry.first);
  std::sort(keys.begin(), keys.end());
  for (const std::uint64_t key : keys) {
    const auto g = static_cast<std::uint32_t>(key >> 32);
    const auto p = static_cast<std::uint32_t>(key & 0xffffffffu);
    const std::uint64_t inter = ov.inter.at(key);
    const std::size_t gi = gt_pos[g];
    const std::size_t pi = pred_pos[p];
    const std::uint64_t ga = r.gt[gi].area;
    const std::uint64_t pa = r.pred[pi].area;
    const double iou = detail::pair_iou(inter, ga, pa);
    if (iou >= cfg.match_iou) candidates.push_back(MatchedPair{g, p, iou});
    if (static_cast<double>(inter) >= cfg.coverage_fraction * static_cast<double>(ga)) {
      ++gt_cover[gi];
      ++pred_cover[pi];
    }
    // Best overlap; equal overlaps prefer the higher Dice, then the smaller
    // label (keys ascend by (g, p)).
    const double d = detail::pair_dice(inter, ga, pa);
    if (inter > gt_best[gi] || (inter == gt_best[gi] && d > r.gt[gi].dice)) {
      gt_best[gi] = inter;
      r.gt[gi].best_pred_label = p;
      r.gt[gi].dice = d;
    }
    if (inter > pred_best[pi] || (inter == pred_best[pi] && d > r.pred[pi].dice)) {
      pred_best[pi] = inter;
      r.pred[pi].best_gt_label = g;
      r.pred[pi].dice = d;
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MatchedPair& a, const MatchedPair& b) { return a.iou > b.iou; });
  for (const MatchedPair& c : candidates) {
    GtRecord& g = r.gt[gt_pos[c.gt_label]];
    PredRecord& p = r.pred[pred_pos[c.pred_label]];
    if (g.matched_pred_label || p.matched_gt_label) continue;
    g.matched_pred_label = c.pred_label;
    p.matched_gt_label = c.gt_label;
    r.pairs.push_back(c);
  }

  for (std::size_t i = 0; i < r.gt.size(); ++i) {
    GtRecord& g = r.gt[i];
    if (gt_cover[i] >= 2) g.category = GtCategory::over_split;
    else if (g.matched_pred_label) g.category = GtCategory::matched;
    else g.category = GtCategory::missed;
  }
  for (std::size_t i = 0; i < r.pred.size(); ++i) {
    PredRecord& p = r.pred[i];
    if (pred_cover[i] >= 2) {
      p.category = PredCategory::under_split;
    } else if (p.matched_gt_label && r.gt[gt_pos[*p.matched_gt_label]].category == GtCategory::matched) {
      p.category = PredCategory::matched;
    } else if (!p.matched_gt_label && pred_cover[i] == 0) {
      p.category = PredCategory::extra;
    } else {
      p.category = PredCategory::absorbed;
    }
  }

  for (const GtRecord& g : r.gt) {
    switch (g.category) {
      case GtCategory::matched: ++r.matched; break;
      case GtCategory::over_split: ++r.over_split; break;
      case GtCategory::missed: ++r.missed; break;
    }
  }
  for (const PredRecord& p : r.pred) {
    if (p.category == PredCategory::extra) ++r.extra;
    if (p.category == PredCategory::under_split) ++r.under_split;
  }

  double gt_sum = 0.0;
  for (const GtRecord& g : r.gt) gt_sum += g.dice;
  double pred_sum = 0.0;
  for (const PredRecord& p : r.pred) pred_sum += p.dice;
  r.mean_dice_over_gt = r.gt.empty() ? 0.0 : gt_sum / static_cast<double>(r.gt.size());
  r.mean_dice_over_pred = r.pred.empty() ? 0.0 : pred_sum / static_cast<double>(r.pred.size());
  if (cfg.dice_average == InstanceAveraging::ground_truth) {
    r.mean_dice_per_instance = r.mean_dice_over_gt;
    r.mean_dice_defined = !r.gt.empty();
  } else {
    r.mean_dice_per_instance = r.mean_dice_over_pred;
    r.mean_dice_defined = !r.pred.empty();
  }
  r.relative_count_defined = r.gt_count > 0;
  r.relative_count =
      r.relative_count_defined ? static_cast<double>(r.pred_count) / static_cast<double>(r.gt_count) : 0.0;
  return r;
}

struct DatasetInstanceDice {
  double mean = 0;
  std::size_t images_used = 0;
  /// Images whose per-instance mean is undefined (no instances to average).
  std::size_t skipped = 0;
  bool defined = false;
};

/// Mean over images of each image's mean per-instance Dice.
inline DatasetInstanceDice mean_instance_dice_per_image(std::span<const MatchReport> reports) {
  if (reports.empty()) throw std::invalid_argument("mean_instance_dice_per_image: no reports");
  DatasetInstanceDice out;
  double sum = 0.0;
  for (const MatchReport& r : reports) {
    if (!r.mean_dice_defined) {
      ++out.skipped;
      continue;
    }
    sum += r.mean_dice_per_instance;
    ++out.images_used;
  }
  out.defined = out.images_used > 0;
  out.mean = out.defined ? sum / static_cast<double>(out.images_used) : 0.0;
  return out;
}

}  // namespace nucleikit
