// File formats: BFR1 float rasters and 16-bit grayscale PNG label maps.
//
// BFR1 layout (all little-endian):
//   bytes 0..3    magic "BFR1"
//   bytes 4..15   uint32 width, height, channels
//   bytes 16..    width*height*channels float32 samples, channel-planar,
//                 row-major within each channel
#pragma once

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "nucleikit/core.hpp"

namespace nucleikit {

inline constexpr char kRasterMagic[4] = {'B', 'F', 'R', '1'};
inline constexpr std::size_t kRasterHeaderBytes = 16;

namespace detail {

inline std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u32_le(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return bytes;
}

}  // namespace detail

inline Raster read_raster(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = detail::slurp(path);
  const std::string where = "'" + path.string() + "': ";
  if (bytes.size() < sizeof kRasterMagic)
    throw FormatError(where + "truncated at offset " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kRasterMagic, sizeof kRasterMagic) != 0) throw FormatError(where + "bad magic");
  if (bytes.size() < kRasterHeaderBytes)
    throw FormatError(where + "truncated at offset " + std::to_string(bytes.size()));

  const std::uint32_t w = detail::load_u32_le(bytes.data() + 4);
  const std::uint32_t h = detail::load_u32_le(bytes.data() + 8);
  const std::uint32_t c = detail::load_u32_le(bytes.data() + 12);
  constexpr std::uint64_t kMaxSide = 1u << 20;
  if (w == 0 || h == 0 || c == 0 || w > kMaxSide || h > kMaxSide || c > 64)
    throw FormatError(where + "invalid dimensions " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                      std::to_string(c));
  const std::uint64_t count = std::uint64_t{w} * h * c;
  const std::uint64_t expected = kRasterHeaderBytes + 4 * count;
  if (bytes.size() < expected) throw FormatError(where + "truncated at offset " + std::to_string(bytes.size()));
  if (bytes.size() > expected) throw FormatError(where + "trailing bytes at offset " + std::to_string(expected));

  std::vector<float> samples(count);
  const unsigned char* p = bytes.data() + kRasterHeaderBytes;
  for (std::size_t i = 0; i < count; ++i, p += 4) {
    samples[i] = std::bit_cast<float>(detail::load_u32_le(p));
    if (!std::isfinite(samples[i])) throw FormatError(where + "non-finite sample at index " + std::to_string(i));
  }
  return Raster(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c), std::move(samples));
}

inline void write_raster(const Raster& r, const std::filesystem::path& path) {
  require_finite(r);
  std::vector<unsigned char> bytes(kRasterHeaderBytes + 4 * r.samples().size());
  std::memcpy(bytes.data(), kRasterMagic, sizeof kRasterMagic);
  detail::store_u32_le(static_cast<std::uint32_t>(r.width()), bytes.data() + 4);
  detail::store_u32_le(static_cast<std::uint32_t>(r.height()), bytes.data() + 8);
  detail::store_u32_le(static_cast<std::uint32_t>(r.channels()), bytes.data() + 12);
  unsigned char* p = bytes.data() + kRasterHeaderBytes;
  for (const float v : r.samples()) {
    detail::store_u32_le(std::bit_cast<std::uint32_t>(v), p);
    p += 4;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// 16-bit grayscale PNG label maps (libpng).  The setjmp frames below hold
// only trivially destructible locals.

namespace detail {

struct PngMessage {
  char text[256] = {};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  if (auto* m = static_cast<PngMessage*>(png_get_error_ptr(png))) {
    std::snprintf(m->text, sizeof m->text, "%s", msg);
  }
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};

inline bool png_write_rows(std::FILE* fp, int width, int height, png_bytepp rows, PngMessage* msg) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

enum class PngReadStatus { ok, libpng_error, not_grayscale, too_large };

// Reads the whole image into `pixels`: big-endian pairs at 16 bits, one byte
// per pixel otherwise.
inline PngReadStatus png_read_gray(std::FILE* fp, PngHeader* header, std::vector<unsigned char>* pixels,
                                     std::vector<png_bytep>* rows, PngMessage* msg) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn, png_warning_fn);
  if (!png) return PngReadStatus::libpng_error;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return PngReadStatus::libpng_error;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngReadStatus::libpng_error;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_get_IHDR(png, info, &header->width, &header->height, &header->bit_depth, &header->color_type, nullptr,
               nullptr, nullptr);
  if (header->color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngReadStatus::not_grayscale;
  }
  if (header->width > (1u << 20) || header->height > (1u << 20)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngReadStatus::too_large;
  }
  if (header->bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels->assign(stride * header->height, 0);
  rows->resize(header->height);
  for (png_uint_32 y = 0; y < header->height; ++y) (*rows)[y] = pixels->data() + stride * y;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return PngReadStatus::ok;
}

}  // namespace detail

/// Writes the canonical form of `labels` as a 16-bit grayscale PNG.
inline void write_labelmap(const LabelMap& labels, const std::filesystem::path& path) {
  if (labels.empty()) throw std::invalid_argument("write_labelmap: empty label map");
  const LabelMap canon = canonicalize(labels);
  const std::uint32_t top = *std::max_element(canon.values().begin(), canon.values().end());
  if (top > 65535) {
    throw std::invalid_argument("write_labelmap: " + std::to_string(top) +
                                " instances exceed the 16-bit PNG limit of 65535");
  }
  const std::size_t stride = static_cast<std::size_t>(canon.width()) * 2;
  std::vector<unsigned char> pixels(stride * static_cast<std::size_t>(canon.height()));
  for (std::size_t i = 0; i < canon.size(); ++i) {
    pixels[2 * i] = static_cast<unsigned char>(canon[i] >> 8);
    pixels[2 * i + 1] = static_cast<unsigned char>(canon[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(canon.height()));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = pixels.data() + stride * y;

  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
  detail::PngMessage msg;
  if (!detail::png_write_rows(fp.get(), canon.width(), canon.height(), rows.data(), &msg)) {
    throw IoError("png write failed for '" + path.string() + "': " + msg.text);
  }
  if (std::fclose(fp.release()) != 0) throw IoError("write error on '" + path.string() + "'");
}

/// Reads a grayscale PNG label map and canonicalizes it.
inline LabelMap read_labelmap(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path.string() + "' for reading");
  detail::PngHeader header;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  detail::PngMessage msg;
  switch (detail::png_read_gray(fp.get(), &header, &pixels, &rows, &msg)) {
    case detail::PngReadStatus::ok:
      break;
    case detail::PngReadStatus::not_grayscale:
      throw FormatError("'" + path.string() + "': non-grayscale PNG (color type " +
                        std::to_string(header.color_type) + ")");
    case detail::PngReadStatus::too_large:
      throw FormatError("'" + path.string() + "': image too large");
    case detail::PngReadStatus::libpng_error:
      throw FormatError("'" + path.string() + "': " + (msg.text[0] ? msg.text : "invalid PNG"));
  }
  LabelMap labels(static_cast<int>(header.width), static_cast<int>(header.height));
  if (header.bit_depth == 16) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = (static_cast<std::uint32_t>(pixels[2 * i]) << 8) | pixels[2 * i + 1];
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = pixels[i];
  }
  return canonicalize(labels);
}

}  // namespace nucleikit
