#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "nucleikit/io.hpp"
#include "test_util.hpp"

using namespace nucleikit;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> header(const char* magic, std::uint32_t w, std::uint32_t h, std::uint32_t c) {
  std::vector<unsigned char> b(magic, magic + 4);
  for (std::uint32_t v : {w, h, c})
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<unsigned char>(v >> (8 * k)));
  return b;
}

void append_float(std::vector<unsigned char>& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<unsigned char>(u >> (8 * k)));
}

std::string message_of(const std::filesystem::path& p) {
  try {
    read_raster(p);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Raster, ReadsLittleEndianPayload) {
  TempDir dir;
  auto b = header("BFR1", 2, 1, 1);
  append_float(b, 0.25f);
  append_float(b, 0.75f);
  write_bytes(dir / "r.bfr", b);
  const Raster r = read_raster(dir / "r.bfr");
  EXPECT_EQ(r.width(), 2);
  EXPECT_EQ(r.height(), 1);
  EXPECT_EQ(r.channels(), 1);
  EXPECT_EQ(r.samples()[0], 0.25f);
  EXPECT_EQ(r.samples()[1], 0.75f);
}

TEST(Raster, BadMagic) {
  TempDir dir;
  auto b = header("XXXX", 1, 1, 1);
  append_float(b, 0.0f);
  write_bytes(dir / "r.bfr", b);
  EXPECT_NE(message_of(dir / "r.bfr").find("bad magic"), std::string::npos);
}

TEST(Raster, TruncatedPayloadReportsOffset) {
  TempDir dir;
  auto b = header("BFR1", 2, 2, 1);
  for (int i = 0; i < 3; ++i) append_float(b, 0.5f);
  write_bytes(dir / "r.bfr", b);
  EXPECT_NE(message_of(dir / "r.bfr").find("truncated at offset 28"), std::string::npos);
}

TEST(Raster, TruncatedHeaderAndTrailingBytes) {
  TempDir dir;
  write_bytes(dir / "short.bfr", {'B', 'F', 'R', '1', 2, 0});
  EXPECT_NE(message_of(dir / "short.bfr").find("truncated at offset 6"), std::string::npos);
  auto b = header("BFR1", 1, 1, 1);
  append_float(b, 0.5f);
  b.push_back(0);
  write_bytes(dir / "long.bfr", b);
  EXPECT_NE(message_of(dir / "long.bfr").find("trailing bytes at offset 20"), std::string::npos);
}

TEST(Raster, MissingFileIsIoError) {
  EXPECT_THROW(read_raster("/nonexistent/none.bfr"), IoError);
}

TEST(Raster, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1e6f, 1e6f);
  for (int trial = 0; trial < 20; ++trial) {
    Raster r(1 + trial % 7, 1 + trial % 5, 1 + trial % 3);
    for (float& v : r.samples()) v = u(rng);
    r.samples()[0] = -0.0f;
    write_raster(r, dir / "r.bfr");
    const Raster back = read_raster(dir / "r.bfr");
    ASSERT_EQ(back.width(), r.width());
    ASSERT_EQ(back.channels(), r.channels());
    EXPECT_EQ(std::memcmp(back.samples().data(), r.samples().data(), r.samples().size() * 4), 0);
  }
}

TEST(Raster, WriteRejectsNaNAndMissingDirectory) {
  TempDir dir;
  Raster r(2, 2);
  r.samples()[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    write_raster(r, dir / "nan.bfr");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "non-finite sample at index 3");
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "nan.bfr"));
  EXPECT_THROW(write_raster(Raster(1, 1), dir / "missing" / "r.bfr"), IoError);
}

TEST(LabelMapPng, RoundTrip) {
  TempDir dir;
  LabelMap m(3, 2, std::vector<std::uint32_t>{0, 1, 2, 2, 1, 0});
  write_labelmap(m, dir / "m.png");
  EXPECT_EQ(read_labelmap(dir / "m.png"), m);
}

TEST(LabelMapPng, CanonicalizesOnRead) {
  TempDir dir;
  LabelMap m(3, 1, std::vector<std::uint32_t>{5, 0, 9});
  // Written through a raw 16-bit encoder so the file really holds 5 and 9.
  write_gray16_png(dir / "m.png", 3, 1, {5, 0, 9});
  const LabelMap back = read_labelmap(dir / "m.png");
  EXPECT_EQ(back, LabelMap(3, 1, std::vector<std::uint32_t>{1, 0, 2}));
}

TEST(LabelMapPng, LargeLabelCountsRoundTrip) {
  TempDir dir;
  LabelMap m(300, 220);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint32_t>(i % 65535) + 1;
  write_labelmap(m, dir / "big.png");
  EXPECT_EQ(read_labelmap(dir / "big.png"), canonicalize(m));
}

TEST(LabelMapPng, TooManyLabels) {
  TempDir dir;
  LabelMap m(70000, 1);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint32_t>(i + 1);
  EXPECT_THROW(write_labelmap(m, dir / "m.png"), std::invalid_argument);
}

TEST(LabelMapPng, RejectsColorAndGarbage) {
  TempDir dir;
  write_rgb_png(dir / "rgb.png", 2, 2);
  try {
    read_labelmap(dir / "rgb.png");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("non-grayscale"), std::string::npos);
  }
  write_bytes(dir / "junk.png", {1, 2, 3, 4});
  EXPECT_THROW(read_labelmap(dir / "junk.png"), FormatError);
  EXPECT_THROW(read_labelmap(dir / "absent.png"), IoError);
}
