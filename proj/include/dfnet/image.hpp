#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dfnet/tensor.hpp"

namespace dfnet {

/// Interleaved float image with values nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) { return data[(std::size_t(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const { return data[(std::size_t(y) * width + x) * channels + c]; }
  std::size_t pixel_count() const { return std::size_t(width) * height; }
};

/// Raw 16-bit single-channel raster (depth levels).
struct Gray16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> levels;
};

/// Luma with weights 0.299 / 0.587 / 0.114. Single-channel input is returned as is.
Image to_grayscale(const Image& rgb);

/// Quantizes to 8 bits per channel (round to nearest, clamp to [0,1]).
void write_png(const std::filesystem::path& path, const Image& image);
/// Reads 8- or 16-bit gray/RGB/RGBA PNGs into [0,1] floats (alpha dropped).
Image read_png(const std::filesystem::path& path);

void write_png16(const std::filesystem::path& path, const Gray16& image);
Gray16 read_png16(const std::filesystem::path& path);

/// Snaps values to the 8-bit grid, matching a write_png/read_png round-trip.
Image quantize8(const Image& image);

/// [H,W,3] interleaved -> [1,3,H,W] planar tensor.
template <typename T>
Tensor<T> image_to_tensor(const Image& image);

}  // namespace dfnet
