#include "dfnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "dfnet/error.hpp"

namespace dfnet {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

struct PngErrorBuffer {
  char message[256] = "unknown error";
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<PngErrorBuffer*>(png_get_error_ptr(png));
  std::snprintf(buf->message, sizeof buf->message, "%s", msg);
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

// Rows are already in big-endian PNG sample order. Every object with a
// destructor is created before setjmp so the error jump skips none of them.
void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
                    const std::vector<png_byte>& bytes, std::size_t row_bytes) {
  FilePtr file = open_file(path, "wb");
  PngErrorBuffer err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw DataError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png write failed for " + path.string() + ": " + err.message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) png_write_row(png, const_cast<png_bytep>(bytes.data() + std::size_t(y) * row_bytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct DecodedPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<png_byte> bytes;
};

DecodedPng decode_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  DecodedPng out;
  std::vector<png_bytep> rows;
  PngErrorBuffer err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw DataError("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png read failed for " + path.string() + ": " + err.message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out.bytes.resize(row_bytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

Image to_grayscale(const Image& rgb) {
  if (rgb.channels == 1) return rgb;
  if (rgb.channels < 3) throw UsageError("grayscale conversion needs 1 or 3+ channels");
  Image out(rgb.width, rgb.height, 1);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const float* p = rgb.data.data() + i * rgb.channels;
    out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw UsageError("write_png supports 1 or 3 channels");
  const int color = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  std::vector<png_byte> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 1.0f);
    bytes[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  write_png_rows(path, image.width, image.height, color, 8, bytes, std::size_t(image.width) * image.channels);
}

Image read_png(const std::filesystem::path& path) {
  DecodedPng d = decode_png(path);
  const int keep = d.channels >= 3 ? 3 : 1;
  Image out(d.width, d.height, keep);
  const int bps = d.bit_depth == 16 ? 2 : 1;
  const float scale = d.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (int c = 0; c < keep; ++c) {
      const png_byte* s = d.bytes.data() + (i * d.channels + c) * bps;
      const unsigned v = bps == 2 ? (unsigned(s[0]) << 8) | s[1] : s[0];
      out.data[i * keep + c] = float(v) * scale;
    }
  }
  return out;
}

void write_png16(const std::filesystem::path& path, const Gray16& image) {
  if (image.levels.size() != std::size_t(image.width) * image.height) throw UsageError("Gray16 size mismatch");
  std::vector<png_byte> bytes(image.levels.size() * 2);
  for (std::size_t i = 0; i < image.levels.size(); ++i) {
    bytes[2 * i] = png_byte(image.levels[i] >> 8);
    bytes[2 * i + 1] = png_byte(image.levels[i] & 0xff);
  }
  write_png_rows(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 16, bytes, std::size_t(image.width) * 2);
}

Gray16 read_png16(const std::filesystem::path& path) {
  DecodedPng d = decode_png(path);
  if (d.channels != 1 || d.bit_depth != 16) {
    throw DataError("expected a 16-bit grayscale PNG: " + path.string());
  }
  Gray16 out{d.width, d.height, std::vector<std::uint16_t>(std::size_t(d.width) * d.height)};
  for (std::size_t i = 0; i < out.levels.size(); ++i) {
    out.levels[i] = std::uint16_t((unsigned(d.bytes[2 * i]) << 8) | d.bytes[2 * i + 1]);
  }
  return out;
}

Image quantize8(const Image& image) {
  Image out = image;
  for (auto& v : out.data) v = float(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

template <typename T>
Tensor<T> image_to_tensor(const Image& image) {
  const std::size_t h = image.height, w = image.width, c = image.channels;
  Tensor<T> out(Shape{1, c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) out[ch * h * w + i] = static_cast<T>(image.data[i * c + ch]);
  return out;
}

template Tensor<float> image_to_tensor(const Image&);
template Tensor<double> image_to_tensor(const Image&);

}  // namespace dfnet
