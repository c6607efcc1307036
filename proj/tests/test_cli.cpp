#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nucleikit/cli.hpp"
#include "nucleikit/io.hpp"
#include "test_util.hpp"

using namespace nucleikit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nucleikit");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::map<std::string, std::string> csv_row(const std::string& csv, const std::string& image) {
  const auto lines = lines_of(csv);
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  const auto header = split(lines.at(0));
  for (const auto& l : lines) {
    const auto cells = split(l);
    if (cells.at(0) != image) continue;
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    return row;
  }
  return {};
}

/// Relative path -> contents for every file below `root`, skipping run
/// manifests (they record wall-clock duration).
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "run_manifest.txt" || name.find(".manifest.txt") != std::string::npos) continue;
    files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const Outcome o = run_cli({"synth", "--n", "3", "--seed", "11", "--nuclei", "6", "--outdir", (dir / "scenes").string()});
    ASSERT_EQ(o.code, 0) << o.err;
  }
  fs::path scene(int i, const char* suffix) const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "scene_%05d_%s", i, suffix);
    return dir / "scenes" / buf;
  }
  TempDir dir;
};

}  // namespace

TEST_F(CliTest, SegmentWatershedWritesLabelsAndManifest) {
  const fs::path out = dir / "ws.png";
  const Outcome o = run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                             out.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  ASSERT_TRUE(fs::exists(out));
  const std::string manifest = read_file(dir / "ws.manifest.txt");
  const std::size_t n = count_instances(read_labelmap(out));
  EXPECT_NE(manifest.find("instance_count = " + std::to_string(n) + "\n"), std::string::npos);
  for (const char* key : {"version = ", "subcommand = segment", "config.threshold = 0.5", "config.erosion_radius = 3",
                          "config.min_instance_area = 20", "config.connectivity = 8", "config.match_iou = 0.5",
                          "config.coverage_fraction = 0.2", "seed = ", "duration_ms = ", "input.prob = "})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
}

TEST_F(CliTest, SegmentCcaAndSoftmax) {
  const Outcome o = run_cli({"segment", "--strategy", "cca", "--center", scene(1, "center.bfr").string(), "--border",
                             scene(1, "border.bfr").string(), "--out", (dir / "cca.png").string(), "--min-size",
                             "5", "--connectivity", "4"});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string manifest = read_file(dir / "cca.manifest.txt");
  EXPECT_NE(manifest.find("config.min_instance_area = 5"), std::string::npos);
  EXPECT_NE(manifest.find("config.connectivity = 4"), std::string::npos);

  Raster soft(8, 8, 3);
  for (std::size_t i = 0; i < soft.plane_size(); ++i) soft.channel(0)[i] = 1.0f;
  write_raster(soft, dir / "soft.bfr");
  const Outcome s = run_cli({"segment", "--strategy", "cca", "--softmax", (dir / "soft.bfr").string(), "--out",
                             (dir / "soft.png").string()});
  EXPECT_EQ(s.code, 0) << s.err;
  EXPECT_NE(read_file(dir / "soft.manifest.txt").find("config.center_border = argmax"), std::string::npos);
}

TEST_F(CliTest, SegmentUsageErrors) {
  const Outcome missing_border = run_cli({"segment", "--strategy", "cca", "--center", scene(0, "center.bfr").string(),
                                          "--out", (dir / "x.png").string()});
  EXPECT_EQ(missing_border.code, 2);
  EXPECT_NE(missing_border.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--out", "x.png"}).code, 2);
  EXPECT_EQ(run_cli({"segment", "--strategy", "magic", "--prob", "p", "--out", "x.png"}).code, 2);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "x.png").string(), "--threshold", "1.5"})
                .code,
            2);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "x.png").string(), "--connectivity", "6"})
                .code,
            2);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "x.png").string(), "--erosion", "abc"})
                .code,
            2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"segment", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST_F(CliTest, SegmentRuntimeErrors) {
  const std::string missing = (dir / "does_not_exist.bfr").string();
  const Outcome o = run_cli({"segment", "--strategy", "watershed", "--prob", missing, "--out", (dir / "x.png").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find(missing), std::string::npos);

  std::ofstream(dir / "junk.bfr") << "not a raster";
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", (dir / "junk.bfr").string(), "--out",
                     (dir / "x.png").string()})
                .code,
            1);
  write_raster(Raster(4, 4, 1, 2.0f), dir / "range.bfr");
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", (dir / "range.bfr").string(), "--out",
                     (dir / "x.png").string()})
                .code,
            1);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "no_dir" / "x.png").string()})
                .code,
            1);
}

TEST_F(CliTest, ConfigFileIsReadBeforeFlags) {
  std::ofstream(dir / "cfg.txt") << "threshold = 0.3\nerosion_radius = 2\n";
  const Outcome o = run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                             (dir / "c.png").string(), "--config", (dir / "cfg.txt").string(), "--erosion", "4"});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string manifest = read_file(dir / "c.manifest.txt");
  EXPECT_NE(manifest.find("config.threshold = 0.3\n"), std::string::npos);
  EXPECT_NE(manifest.find("config.erosion_radius = 4\n"), std::string::npos);
  std::ofstream(dir / "bad.txt") << "threshold = 7\n";
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "c.png").string(), "--config", (dir / "bad.txt").string()})
                .code,
            2);
  EXPECT_EQ(run_cli({"segment", "--strategy", "watershed", "--prob", scene(0, "whole.bfr").string(), "--out",
                     (dir / "c.png").string(), "--config", (dir / "absent.txt").string()})
                .code,
            1);
}

TEST_F(CliTest, EvalIdenticalDirectories) {
  fs::create_directories(dir / "gt");
  for (int i = 0; i < 3; ++i) fs::copy_file(scene(i, "gt.png"), dir / "gt" / ("img" + std::to_string(i) + ".png"));
  const Outcome o = run_cli({"eval", "--pred", (dir / "gt").string(), "--gt", (dir / "gt").string(), "--csv",
                             (dir / "e.csv").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = read_file(dir / "e.csv");
  const auto lines = lines_of(csv);
  ASSERT_EQ(lines.size(), 5u);
  std::string header;
  for (const auto& c : cli::eval_columns()) header += (header.empty() ? "" : ",") + c;
  EXPECT_EQ(lines[0], header);
  EXPECT_EQ(lines[0],
            "image,gt_count,pred_count,relative_count,mean_instance_dice,matched,extra,missed,over_split,under_split,"
            "accuracy,dice,jaccard,precision,recall,fdr,fnr,for,fpr,npv,tnr");
  EXPECT_EQ(lines[1].substr(0, 5), "img0,");
  EXPECT_EQ(lines[3].substr(0, 5), "img2,");
  auto agg = csv_row(csv, "AGGREGATE");
  EXPECT_EQ(agg["dice"], "1.000000");
  EXPECT_EQ(agg["mean_instance_dice"], "1.000000");
  for (const char* k : {"extra", "missed", "over_split", "under_split"}) EXPECT_EQ(agg[k], "0.000000") << k;
  EXPECT_EQ(csv_row(csv, "img1")["matched"], "6");
  EXPECT_TRUE(fs::exists(dir / "e.manifest.txt"));
}

TEST_F(CliTest, EvalEmptyPrediction) {
  write_labelmap(LabelMap(128, 128), dir / "empty.png");
  const Outcome o = run_cli({"eval", "--pred", (dir / "empty.png").string(), "--gt", scene(0, "gt.png").string(),
                             "--csv", (dir / "e.csv").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  auto row = csv_row(read_file(dir / "e.csv"), "empty");
  EXPECT_EQ(row["missed"], row["gt_count"]);
  EXPECT_EQ(row["dice"], "0.000000");
  EXPECT_EQ(row["precision"], "1.000000");

  const Outcome sem = run_cli({"eval", "--pred", (dir / "empty.png").string(), "--gt", scene(0, "gt.png").string(),
                               "--csv", (dir / "s.csv").string(), "--semantic-only"});
  ASSERT_EQ(sem.code, 0);
  auto srow = csv_row(read_file(dir / "s.csv"), "empty");
  EXPECT_EQ(srow["matched"], "");
  EXPECT_EQ(srow["dice"], "0.000000");
}

TEST_F(CliTest, EvalUndefinedValuesPrintNA) {
  write_labelmap(LabelMap(16, 16), dir / "blank.png");
  const Outcome o = run_cli({"eval", "--pred", (dir / "blank.png").string(), "--gt", (dir / "blank.png").string(),
                             "--csv", (dir / "e.csv").string()});
  ASSERT_EQ(o.code, 0);
  auto row = csv_row(read_file(dir / "e.csv"), "blank");
  EXPECT_EQ(row["relative_count"], "NA");
  EXPECT_EQ(row["mean_instance_dice"], "NA");
  auto agg = csv_row(read_file(dir / "e.csv"), "AGGREGATE");
  EXPECT_EQ(agg["relative_count"], "NA");
}

TEST_F(CliTest, EvalErrors) {
  fs::create_directories(dir / "p");
  fs::create_directories(dir / "g");
  fs::copy_file(scene(0, "gt.png"), dir / "p" / "a.png");
  fs::copy_file(scene(0, "gt.png"), dir / "g" / "a.png");
  fs::copy_file(scene(1, "gt.png"), dir / "p" / "lonely.png");
  const Outcome o = run_cli({"eval", "--pred", (dir / "p").string(), "--gt", (dir / "g").string(), "--csv",
                             (dir / "e.csv").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("lonely.png"), std::string::npos);

  write_labelmap(LabelMap(10, 10), dir / "small.png");
  EXPECT_EQ(run_cli({"eval", "--pred", (dir / "small.png").string(), "--gt", scene(0, "gt.png").string(), "--csv",
                     (dir / "e.csv").string()})
                .code,
            1);
  EXPECT_EQ(run_cli({"eval", "--pred", (dir / "p").string(), "--gt", scene(0, "gt.png").string(), "--csv",
                     (dir / "e.csv").string()})
                .code,
            2);
  EXPECT_EQ(run_cli({"eval", "--pred", (dir / "nope").string(), "--gt", scene(0, "gt.png").string(), "--csv",
                     (dir / "e.csv").string()})
                .code,
            1);
  EXPECT_EQ(run_cli({"eval", "--pred", "a.png"}).code, 2);
}

TEST_F(CliTest, ReportSummarizesAggregate) {
  run_cli({"eval", "--pred", scene(0, "gt.png").string(), "--gt", scene(0, "gt.png").string(), "--csv",
           (dir / "e.csv").string()});
  const Outcome o = run_cli({"report", "--csv", (dir / "e.csv").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("images: 1"), std::string::npos);
  EXPECT_NE(o.out.find("dice: 1.000000"), std::string::npos);
  EXPECT_EQ(run_cli({"report", "--csv", (dir / "missing.csv").string()}).code, 1);
  std::ofstream(dir / "other.csv") << "a,b\n1,2\n";
  EXPECT_EQ(run_cli({"report", "--csv", (dir / "other.csv").string()}).code, 1);
}

TEST_F(CliTest, AugmentOutputsAndDeterminism) {
  const auto args = [&](const std::string& out, const std::string& n) {
    return std::vector<std::string>{"augment", "--image", scene(0, "whole.bfr").string(), "--mask",
                                    scene(0, "gt.png").string(), "--n", n, "--seed", "5", "--patch", "96",
                                    "--outdir", (dir / out).string()};
  };
  ASSERT_EQ(run_cli(args("a1", "4")).code, 0);
  ASSERT_EQ(run_cli(args("a2", "4")).code, 0);
  const auto t1 = tree(dir / "a1");
  EXPECT_EQ(t1, tree(dir / "a2"));
  EXPECT_EQ(t1.size(), 9u);
  EXPECT_TRUE(t1.count("aug_00003.bfr"));
  EXPECT_EQ(lines_of(t1.at("manifest.csv")).size(), 5u);
  EXPECT_EQ(read_raster(dir / "a1" / "aug_00000.bfr").width(), 96);
  EXPECT_TRUE(fs::exists(dir / "a1" / "run_manifest.txt"));
  EXPECT_NE(read_file(dir / "a1" / "run_manifest.txt").find("seed = 5\n"), std::string::npos);

  ASSERT_EQ(run_cli(args("empty", "0")).code, 0);
  EXPECT_EQ(lines_of(read_file(dir / "empty" / "manifest.csv")).size(), 1u);

  auto too_big = args("big", "2");
  too_big[10] = "200";
  EXPECT_EQ(run_cli(too_big).code, 2);
  auto random_crop = args("rc", "2");
  random_crop.push_back("--random-crop");
  EXPECT_EQ(run_cli(random_crop).code, 0);
}

TEST_F(CliTest, SynthDeterminismAndErrors) {
  const auto args = [&](const std::string& out) {
    return std::vector<std::string>{"synth", "--n", "2", "--seed", "3", "--overlap", "--outdir", (dir / out).string()};
  };
  ASSERT_EQ(run_cli(args("s1")).code, 0);
  ASSERT_EQ(run_cli(args("s2")).code, 0);
  EXPECT_EQ(tree(dir / "s1"), tree(dir / "s2"));
  EXPECT_EQ(tree(dir / "s1").size(), 9u);
  const Outcome zero = run_cli({"synth", "--n", "0", "--seed", "1", "--outdir", (dir / "s0").string()});
  EXPECT_EQ(zero.code, 0);
  EXPECT_EQ(lines_of(read_file(dir / "s0" / "manifest.csv")).size(), 1u);
  EXPECT_EQ(run_cli({"synth", "--n", "1", "--seed", "1", "--width", "30", "--height", "30", "--nuclei", "40",
                     "--outdir", (dir / "full").string()})
                .code,
            1);
  EXPECT_EQ(run_cli({"synth", "--n", "1", "--seed", "1", "--radius-min", "9", "--radius-max", "3", "--outdir",
                     (dir / "bad").string()})
                .code,
            2);
}

TEST(WorkerCount, EnvironmentCap) {
  ::setenv("NUCLEIKIT_THREADS", "3", 1);
  EXPECT_EQ(cli::worker_count(8), 3u);
  EXPECT_EQ(cli::worker_count(2), 2u);
  EXPECT_LE(cli::worker_count(0), 3u);
  ::setenv("NUCLEIKIT_THREADS", "junk", 1);
  EXPECT_EQ(cli::worker_count(8), 8u);
  ::unsetenv("NUCLEIKIT_THREADS");
  EXPECT_EQ(cli::worker_count(5), 5u);
}

TEST(ParallelFor, RethrowsFirstFailureByIndex) {
  std::vector<int> seen(100, 0);
  cli::parallel_for(100, 4, [&](std::size_t i) { seen[i] = 1; });
  for (int v : seen) EXPECT_EQ(v, 1);
  try {
    cli::parallel_for(50, 4, [](std::size_t i) {
      if (i == 7 || i == 30) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "job 7");
  }
}
