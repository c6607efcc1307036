// Command-line front end: segment, eval, augment, synth and report.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.
#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nucleikit/augment.hpp"
#include "nucleikit/core.hpp"
#include "nucleikit/instance.hpp"
#include "nucleikit/io.hpp"
#include "nucleikit/metrics.hpp"
#include "nucleikit/synth.hpp"

namespace nucleikit::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Frozen column order of the evaluation CSV.
inline const std::vector<std::string>& eval_columns() {
  static const std::vector<std::string> cols = {
      "image", "gt_count", "pred_count", "relative_count", "mean_instance_dice", "matched", "extra",
      "missed", "over_split", "under_split", "accuracy", "dice", "jaccard", "precision", "recall",
      "fdr", "fnr", "for", "fpr", "npv", "tnr"};
  return cols;
}

class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Worker count: `requested` (0 = hardware concurrency), capped by the
/// NUCLEIKIT_THREADS environment variable when set.
inline unsigned worker_count(unsigned requested) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* env = std::getenv("NUCLEIKIT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs job(i) for i in [0, count) on up to `workers` threads.  The first
/// failure by index is rethrown after all workers finish.
template <typename Job>
void parallel_for(std::size_t count, unsigned workers, Job&& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
  std::string subcommand;
  PipelineConfig config;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> results;
  double duration_ms = 0;

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << "tool = nucleikit\n";
    f << "version = " << kVersion << "\n";
    f << "subcommand = " << subcommand << "\n";
    for (const auto& [k, v] : config.entries()) f << "config." << k << " = " << v << "\n";
    for (const auto& [k, v] : inputs) f << "input." << k << " = " << v << "\n";
    for (const auto& [k, v] : outputs) f << "output." << k << " = " << v << "\n";
    f << "seed = " << (seed ? std::to_string(*seed) : std::string("none")) << "\n";
    for (const auto& [k, v] : results) f << k << " = " << v << "\n";
    f << "duration_ms = " << fixed6(duration_ms) << "\n";
    if (!f) throw IoError("write error on '" + path.string() + "'");
  }
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  std::filesystem::path p = output;
  p.replace_extension(".manifest.txt");
  return p;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::string image;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::optional<MatchReport> instances;
  MetricTable semantic;
};

inline EvalRow evaluate_pair(const std::string& image, const LabelMap& pred, const LabelMap& gt,
                             const PipelineConfig& cfg, bool semantic_only) {
  if (!pred.same_shape(gt)) {
    throw Error("image '" + image + "': prediction " + std::to_string(pred.width()) + "x" +
                std::to_string(pred.height()) + " and ground truth " + std::to_string(gt.width()) + "x" +
                std::to_string(gt.height()) + " differ in shape");
  }
  EvalRow row;
  row.image = image;
  row.gt_count = count_instances(gt);
  row.pred_count = count_instances(pred);
  row.semantic = metric_table(confusion(foreground(pred), foreground(gt)));
  if (!semantic_only) row.instances = match_instances(pred, gt, cfg);
  return row;
}

/// Writes the CSV: one row per image in the given order, then AGGREGATE with
/// the mean of every defined value in each column.  Undefined cells are NA;
/// instance columns are empty in semantic-only rows.
inline void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& rows) {
  const auto& cols = eval_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";

  const std::size_t numeric = cols.size() - 1;
  std::vector<double> sum(numeric, 0.0);
  std::vector<std::size_t> used(numeric, 0);
  for (const EvalRow& r : rows) {
    std::vector<std::string> cells;
    std::size_t col = 0;
    auto count = [&](std::size_t v) {
      cells.push_back(std::to_string(v));
      sum[col] += static_cast<double>(v);
      ++used[col++];
    };
    auto ratio = [&](double v, bool defined) {
      cells.push_back(defined ? fixed6(v) : "NA");
      if (defined) {
        sum[col] += v;
        ++used[col];
      }
      ++col;
    };
    auto blank = [&]() {
      cells.emplace_back();
      ++col;
    };
    count(r.gt_count);
    count(r.pred_count);
    if (r.instances) {
      const MatchReport& m = *r.instances;
      ratio(m.relative_count, m.relative_count_defined);
      ratio(m.mean_dice_per_instance, m.mean_dice_defined);
      count(m.matched);
      count(m.extra);
      count(m.missed);
      count(m.over_split);
      count(m.under_split);
    } else {
      ratio(r.gt_count ? static_cast<double>(r.pred_count) / static_cast<double>(r.gt_count) : 0.0, r.gt_count > 0);
      for (int k = 0; k < 6; ++k) blank();
    }
    const MetricTable& t = r.semantic;
    for (const double v : {t.accuracy, t.dice, t.jaccard, t.precision, t.recall, t.fdr, t.fnr, t.for_, t.fpr, t.npv,
                           t.tnr})
      ratio(v, true);
    os << r.image;
    for (const auto& c : cells) os << "," << c;
    os << "\n";
  }
  os << "AGGREGATE";
  for (std::size_t c = 0; c < numeric; ++c) {
    os << ",";
    if (used[c] > 0) os << fixed6(sum[c] / static_cast<double>(used[c]));
    else os << "NA";
  }
  os << "\n";
}

struct ImagePair {
  std::string name;
  std::filesystem::path pred;
  std::filesystem::path gt;
};

inline std::map<std::string, std::filesystem::path> png_files_by_stem(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    files.emplace(entry.path().stem().string(), entry.path());
  }
  return files;
}

/// Pairs prediction and ground-truth files.  Two files form one pair; two
/// directories are paired by identical file stem and any unpaired stem is an
/// error.
inline std::vector<ImagePair> pair_inputs(const std::filesystem::path& pred, const std::filesystem::path& gt) {
  namespace fs = std::filesystem;
  for (const auto& p : {pred, gt})
    if (!fs::exists(p)) throw IoError("no such file or directory: '" + p.string() + "'");
  const bool pred_dir = fs::is_directory(pred);
  const bool gt_dir = fs::is_directory(gt);
  if (pred_dir != gt_dir) throw UsageError("--pred and --gt must both be files or both be directories");
  if (!pred_dir) return {ImagePair{pred.stem().string(), pred, gt}};

  const auto pf = png_files_by_stem(pred);
  const auto gf = png_files_by_stem(gt);
  std::vector<ImagePair> pairs;
  std::vector<std::string> unpaired;
  for (const auto& [stem, path] : pf) {
    const auto it = gf.find(stem);
    if (it == gf.end()) unpaired.push_back(path.string());
    else pairs.push_back(ImagePair{stem, path, it->second});
  }
  for (const auto& [stem, path] : gf)
    if (!pf.count(stem)) unpaired.push_back(path.string());
  if (!unpaired.empty()) {
    std::string msg = "unpaired files:";
    for (const auto& u : unpaired) msg += "\n  " + u;
    throw Error(msg);
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Subcommands

struct ConfigFlags {
  std::string config_file;
  double threshold = 0;
  int erosion = 0;
  int min_size = 0;
  int connectivity = 0;
  std::string surface;
  double match_iou = 0;
  double coverage = 0;
  std::string dice_average;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> overrides;

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    try {
      if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw IoError("cannot open config file '" + config_file + "'");
        cfg = parse_config(in);
      }
      for (const auto& [opt, apply] : overrides)
        if (opt->count() > 0) apply(cfg);
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

inline void add_segment_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_file, "Plain-text key = value config file, read before flags");
  f.overrides.emplace_back(app->add_option("--threshold", f.threshold, "Probability threshold in (0,1)"),
                           [&f](PipelineConfig& c) { c.threshold = f.threshold; });
  f.overrides.emplace_back(app->add_option("--erosion", f.erosion, "Erosion disk radius in pixels"),
                           [&f](PipelineConfig& c) { c.erosion_radius = f.erosion; });
  f.overrides.emplace_back(app->add_option("--min-size", f.min_size, "Minimum instance area in pixels"),
                           [&f](PipelineConfig& c) { c.min_instance_area = f.min_size; });
  f.overrides.emplace_back(app->add_option("--connectivity", f.connectivity, "Foreground connectivity (4 or 8)"),
                           [&f](PipelineConfig& c) { c.set("connectivity", std::to_string(f.connectivity)); });
  f.overrides.emplace_back(app->add_option("--surface", f.surface, "Watershed flooding surface")
                               ->check(CLI::IsMember({"distance", "probability"})),
                           [&f](PipelineConfig& c) { c.set("flood_surface", f.surface); });
}

inline void add_match_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_file, "Plain-text key = value config file, read before flags");
  f.overrides.emplace_back(app->add_option("--match-iou", f.match_iou, "IoU needed for a one-to-one match"),
                           [&f](PipelineConfig& c) { c.match_iou = f.match_iou; });
  f.overrides.emplace_back(app->add_option("--coverage", f.coverage, "Coverage fraction for split categories"),
                           [&f](PipelineConfig& c) { c.coverage_fraction = f.coverage; });
  f.overrides.emplace_back(app->add_option("--dice-average", f.dice_average, "Average instance Dice over gt or pred")
                               ->check(CLI::IsMember({"gt", "pred"})),
                           [&f](PipelineConfig& c) { c.set("dice_average", f.dice_average); });
}

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SegmentArgs {
  std::string strategy;
  std::string prob, center, border, softmax, out;
  ConfigFlags flags;
};

inline int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  PipelineConfig cfg = a.flags.resolve();
  RunManifest m;
  m.subcommand = "segment";
  SegmentationResult result;
  if (a.strategy == "watershed") {
    if (a.prob.empty()) throw UsageError("--strategy watershed requires --prob");
    m.inputs = {{"prob", a.prob}};
    result = segment_watershed(read_raster(a.prob), cfg);
  } else if (!a.softmax.empty()) {
    cfg.center_border = CenterBorderMode::argmax;
    m.inputs = {{"softmax", a.softmax}};
    result = segment_cca_softmax(read_raster(a.softmax), cfg);
  } else {
    if (a.center.empty() || a.border.empty())
      throw UsageError("--strategy cca requires --center and --border (or --softmax)");
    m.inputs = {{"center", a.center}, {"border", a.border}};
    result = segment_cca(read_raster(a.center), read_raster(a.border), cfg);
  }
  write_labelmap(result.labels, a.out);
  m.config = cfg;
  m.inputs.insert(m.inputs.begin(), {"strategy", a.strategy});
  m.outputs = {{"labels", a.out}};
  m.results = {{"instance_count", std::to_string(result.instance_count)},
               {"dropped_small", std::to_string(result.dropped_small)},
               {"unreachable_pixels", std::to_string(result.unreachable_pixels)}};
  m.duration_ms = elapsed_ms(start);
  m.write(manifest_path_for(a.out));
  out << "instances: " << result.instance_count << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred, gt, csv;
  bool semantic_only = false;
  unsigned threads = 0;
  ConfigFlags flags;
};

inline std::vector<EvalRow> evaluate_all(const std::vector<ImagePair>& pairs, const PipelineConfig& cfg,
                                         bool semantic_only, unsigned workers) {
  std::vector<EvalRow> rows(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    rows[i] = evaluate_pair(pairs[i].name, read_labelmap(pairs[i].pred), read_labelmap(pairs[i].gt), cfg,
                            semantic_only);
  });
  return rows;
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  const PipelineConfig cfg = a.flags.resolve();
  const std::vector<ImagePair> pairs = pair_inputs(a.pred, a.gt);
  const std::vector<EvalRow> rows = evaluate_all(pairs, cfg, a.semantic_only, worker_count(a.threads));

  std::ostringstream csv;
  write_eval_csv(csv, rows);
  std::ofstream f(a.csv, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + a.csv + "' for writing");
  f << csv.str();
  if (!f) throw IoError("write error on '" + a.csv + "'");

  RunManifest m;
  m.subcommand = "eval";
  m.config = cfg;
  m.inputs = {{"pred", a.pred}, {"gt", a.gt}};
  m.outputs = {{"csv", a.csv}};
  m.results = {{"images", std::to_string(rows.size())},
               {"semantic_only", a.semantic_only ? "true" : "false"}};
  m.duration_ms = elapsed_ms(start);
  m.write(manifest_path_for(a.csv));
  out << "evaluated " << rows.size() << " image(s)\n";
  return 0;
}

struct AugmentArgs {
  std::string image, mask, outdir;
  int n = 0;
  std::uint64_t seed = 0;
  int patch = 0;
  bool random_crop = false;
};

inline std::string numbered(const char* prefix, int i, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%05d%s", prefix, i, suffix);
  return buf;
}

inline int cmd_augment(const AugmentArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  const auto start = Clock::now();
  if (a.n < 0) throw UsageError("--n must be >= 0");
  if (a.patch <= 0) throw UsageError("--patch must be positive");
  const Raster img = read_raster(a.image);
  const LabelMap mask = read_labelmap(a.mask);
  if (!img.same_shape(mask)) throw Error("image and mask differ in shape");
  if (a.patch > img.width() || a.patch > img.height()) {
    throw UsageError("--patch " + std::to_string(a.patch) + " exceeds image size " + std::to_string(img.width()) +
                     "x" + std::to_string(img.height()));
  }
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);
  std::ostringstream manifest;
  manifest << "file,rotation,flip_h,flip_v,scale,intensity_op,intensity_param,noise_seed\n";
  const CropAnchor anchor = a.random_crop ? CropAnchor::random : CropAnchor::center;
  for (int i = 0; i < a.n; ++i) {
    const AugmentationPlan plan = sample_plan(a.seed, static_cast<std::uint64_t>(i));
    auto [gi, gm] = apply_geometry(img, mask, plan, a.patch, anchor);
    const Raster final_img = apply_intensity(gi, plan);
    const std::string stem = numbered("aug_", i, "");
    write_raster(final_img, dir / (stem + ".bfr"));
    write_labelmap(gm, dir / (stem + ".png"));
    manifest << stem << "," << plan.rotation << "," << plan.flip_h << "," << plan.flip_v << ","
             << fixed6(plan.scale) << "," << to_string(plan.intensity) << "," << fixed6(plan.intensity_param) << ","
             << plan.seed << "\n";
  }
  std::ofstream f(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in '" + a.outdir + "'");
  f << manifest.str();

  RunManifest m;
  m.subcommand = "augment";
  m.inputs = {{"image", a.image}, {"mask", a.mask}};
  m.outputs = {{"dir", a.outdir}};
  m.seed = a.seed;
  m.results = {{"n", std::to_string(a.n)},
               {"patch", std::to_string(a.patch)},
               {"crop", a.random_crop ? "random" : "center"}};
  m.duration_ms = elapsed_ms(start);
  m.write(dir / "run_manifest.txt");
  out << "wrote " << a.n << " augmented pair(s)\n";
  return 0;
}

struct SynthArgs {
  std::string outdir;
  int n = 0;
  int width = 128;
  int height = 128;
  int nuclei = 10;
  std::uint64_t seed = 0;
  bool overlap = false;
  double radius_min = 8.0;
  double radius_max = 12.0;
  double pair_factor = 0.0;
  double noise = 0.05;
  double blur = 1.0;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  const auto start = Clock::now();
  if (a.n < 0) throw UsageError("--n must be >= 0");
  SceneSpec base;
  base.width = a.width;
  base.height = a.height;
  base.nucleus_count = a.nuclei;
  base.radius_min = a.radius_min;
  base.radius_max = a.radius_max;
  base.overlap_allowed = a.overlap;
  base.max_center_distance_factor = a.pair_factor;
  base.noise_sigma = a.noise;
  base.blur_sigma = a.blur;
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);
  std::ostringstream manifest;
  manifest << "scene,seed,width,height,nuclei,radius_min,radius_max,overlap,pair_factor,noise_sigma,blur_sigma,"
              "gt_instances\n";
  for (int i = 0; i < a.n; ++i) {
    SceneSpec spec = base;
    spec.seed = derive_seed(a.seed, static_cast<std::uint64_t>(i));
    const Scene scene = generate_scene(spec);
    const std::string stem = numbered("scene_", i, "");
    write_labelmap(scene.gt, dir / (stem + "_gt.png"));
    write_raster(scene.whole_prob, dir / (stem + "_whole.bfr"));
    write_raster(scene.center_prob, dir / (stem + "_center.bfr"));
    write_raster(scene.border_prob, dir / (stem + "_border.bfr"));
    manifest << stem << "," << spec.seed << "," << spec.width << "," << spec.height << "," << spec.nucleus_count
             << "," << fixed6(spec.radius_min) << "," << fixed6(spec.radius_max) << "," << spec.overlap_allowed << ","
             << fixed6(spec.max_center_distance_factor) << "," << fixed6(spec.noise_sigma) << ","
             << fixed6(spec.blur_sigma) << "," << count_instances(scene.gt) << "\n";
  }
  std::ofstream f(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in '" + a.outdir + "'");
  f << manifest.str();

  RunManifest m;
  m.subcommand = "synth";
  m.outputs = {{"dir", a.outdir}};
  m.seed = a.seed;
  m.results = {{"n", std::to_string(a.n)}};
  m.duration_ms = elapsed_ms(start);
  m.write(dir / "run_manifest.txt");
  out << "wrote " << a.n << " scene(s)\n";
  return 0;
}

/// Prints the AGGREGATE row of an evaluation CSV as `column: value` lines.
inline int cmd_report(const std::string& csv_path, std::ostream& out) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open '" + csv_path + "' for reading");
  std::string header;
  std::getline(in, header);
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  if (split(header) != eval_columns()) throw FormatError("'" + csv_path + "': not an evaluation CSV");
  std::string line;
  std::optional<std::vector<std::string>> aggregate;
  std::size_t images = 0;
  while (std::getline(in, line)) {
    auto cells = split(line);
    if (cells.empty()) continue;
    if (cells.front() == "AGGREGATE") aggregate = std::move(cells);
    else ++images;
  }
  if (!aggregate || aggregate->size() != eval_columns().size())
    throw FormatError("'" + csv_path + "': missing AGGREGATE row");
  out << "images: " << images << "\n";
  for (std::size_t i = 1; i < aggregate->size(); ++i) out << eval_columns()[i] << ": " << (*aggregate)[i] << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nuclei instance segmentation post-processing and evaluation", "nucleikit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SegmentArgs seg;
  CLI::App* segment = app.add_subcommand("segment", "Turn probability maps into labeled nuclei");
  segment->add_option("--strategy", seg.strategy, "Instance strategy")
      ->required()
      ->check(CLI::IsMember({"watershed", "cca"}));
  segment->add_option("--prob", seg.prob, "Whole-nucleus probability map (BFR1), watershed strategy");
  segment->add_option("--center", seg.center, "Centre probability map (BFR1), cca strategy");
  segment->add_option("--border", seg.border, "Border probability map (BFR1), cca strategy");
  segment->add_option("--softmax", seg.softmax, "3-channel background/centre/border softmax (BFR1), cca argmax mode");
  segment->add_option("--out", seg.out, "Output label map (16-bit PNG)")->required();
  add_segment_flags(segment, seg.flags);

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "Score predicted label maps against ground truth");
  eval->add_option("--pred", ev.pred, "Prediction PNG or directory")->required();
  eval->add_option("--gt", ev.gt, "Ground-truth PNG or directory")->required();
  eval->add_option("--csv", ev.csv, "Output CSV")->required();
  eval->add_flag("--semantic-only", ev.semantic_only, "Skip instance matching");
  eval->add_option("--threads", ev.threads, "Worker threads (0 = all cores; NUCLEIKIT_THREADS caps)");
  add_match_flags(eval, ev.flags);

  AugmentArgs au;
  CLI::App* augment = app.add_subcommand("augment", "Materialize augmented image/mask pairs");
  augment->add_option("--image", au.image, "Input image (BFR1, samples in [0,1])")->required();
  augment->add_option("--mask", au.mask, "Input label map (PNG)")->required();
  augment->add_option("--n", au.n, "Number of augmented pairs")->required();
  augment->add_option("--seed", au.seed, "Master seed")->required();
  augment->add_option("--patch", au.patch, "Output patch side in pixels")->required();
  augment->add_option("--outdir", au.outdir, "Output directory")->required();
  augment->add_flag("--random-crop", au.random_crop, "Random crop position instead of centred");

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic nuclei scenes");
  synth->add_option("--n", sy.n, "Number of scenes")->required();
  synth->add_option("--width", sy.width, "Scene width");
  synth->add_option("--height", sy.height, "Scene height");
  synth->add_option("--nuclei", sy.nuclei, "Nuclei per scene");
  synth->add_option("--seed", sy.seed, "Master seed")->required();
  synth->add_option("--outdir", sy.outdir, "Output directory")->required();
  synth->add_flag("--overlap", sy.overlap, "Allow overlapping nuclei");
  synth->add_option("--radius-min", sy.radius_min, "Smallest semi-axis");
  synth->add_option("--radius-max", sy.radius_max, "Largest semi-axis");
  synth->add_option("--pair-factor", sy.pair_factor, "With --overlap: place touching pairs at this centre distance "
                                                     "factor of the mean radius");
  synth->add_option("--noise", sy.noise, "Additive noise sigma");
  synth->add_option("--blur", sy.blur, "Blur sigma in pixels");

  std::string report_csv;
  CLI::App* report = app.add_subcommand("report", "Summarize an evaluation CSV");
  report->add_option("--csv", report_csv, "Evaluation CSV")->required();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == segment) return cmd_segment(seg, out);
    if (active == eval) return cmd_eval(ev, out);
    if (active == augment) return cmd_augment(au, out);
    if (active == synth) return cmd_synth(sy, out);
    if (active == report) return cmd_report(report_csv, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << active->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nucleikit::cli
