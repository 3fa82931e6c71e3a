#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "dfnet/image.hpp"

namespace dfnet {

/// Per-pixel displacement in pixels; u positive rightward, v positive downward.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), u(std::size_t(w) * h, 0.0f), v(std::size_t(w) * h, 0.0f) {}

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  double mean_magnitude() const;
};

/// Coarse-to-fine Horn-Schunck settings.
struct FlowParams {
  int levels = 4;
  double scale = 0.5;
  int iterations = 100;  // per level and warp
  double alpha = 15.0;   // smoothness weight, for intensities on a 0..255 scale
  int warps = 1;         // relinearizations per level
  double relaxation = 1.8;
  double presmooth_sigma = 0.8;
};

/// Energy trace of one linearized solve (one warp at one pyramid level).
struct FlowSolveTrace {
  int level = 0;  // 0 is full resolution
  int warp = 0;
  int width = 0;
  int height = 0;
  std::vector<double> energy;  // initial value followed by one entry per iteration
};

struct FlowDiagnostics {
  std::vector<FlowSolveTrace> solves;
};

/// Dense flow from `prev` to `curr`: prev(x) ~ curr(x + flow(x)).
/// Images are single-channel in [0,1] (RGB input is converted to luma).
/// Throws UsageError on extent mismatch or images smaller than 2x2.
FlowField estimate_flow(const Image& prev, const Image& curr, const FlowParams& params = {},
                        FlowDiagnostics* diagnostics = nullptr);

/// Middlebury .flo: float32 202021.25, int32 width, int32 height, then
/// row-major interleaved (u,v) float32 pairs; all little-endian.
void write_flo(std::ostream& out, const FlowField& flow);
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(std::istream& in);
FlowField read_flo(const std::filesystem::path& path);

/// Hue encodes direction, saturation encodes magnitude relative to the
/// largest vector in the field; zero flow renders white.
Image flow_color_preview(const FlowField& flow);

/// Hue in [0,1) used by flow_color_preview for a direction.
double flow_hue(double u, double v);

}  // namespace dfnet
