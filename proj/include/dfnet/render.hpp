#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfnet/image.hpp"
#include "dfnet/scene.hpp"

namespace dfnet {

enum class DepthConvention { Spherical, Planar };

/// Per-pixel metric depth with a validity mask. Valid pixels satisfy 0 < value <= max_range.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
  DepthConvention convention = DepthConvention::Spherical;
  double max_range = 40.0;

  DepthMap() = default;
  DepthMap(int w, int h, DepthConvention conv, double range)
      : width(w), height(h), values(std::size_t(w) * h, 0.0), valid(std::size_t(w) * h, 0), convention(conv),
        max_range(range) {}

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  std::size_t valid_count() const;
};

struct RenderOptions {
  double max_range = 40.0;
  /// Sub-poses averaged for motion blur; 0 or 1 disables blur.
  int motion_blur_samples = 0;
  /// Start of the exposure segment for motion blur (typically the previous frame's pose).
  std::optional<CameraPose> blur_from;
};

struct RenderResult {
  Image rgb;  // 3 channels in [0,1]
  DepthMap depth;  // spherical
};

/// Distance along a unit ray to the first primitive or ground hit, if any.
std::optional<double> trace_distance(const Scene& scene, const Vec3& origin, const Vec3& dir);

/// Raycasts the scene. Depth is the Euclidean distance from the camera centre
/// to the first hit; hits beyond max_range and sky pixels are invalid. Haze
/// blends towards the horizon colour by exp(-density * distance).
RenderResult render(const Scene& scene, const CameraPose& pose, const Intrinsics& intrinsics,
                    const RenderOptions& options = {});

/// sqrt(1 + ((x-cx)/f)^2 + ((y-cy)/f)^2): spherical over planar depth at pixel (x, y).
double ray_length_factor(const Intrinsics& k, double x, double y);

/// Throws UsageError if the map is not tagged with the source convention or its extents differ from the intrinsics.
DepthMap spherical_to_planar(const DepthMap& depth, const Intrinsics& intrinsics);
DepthMap planar_to_spherical(const DepthMap& depth, const Intrinsics& intrinsics);

/// level = round(depth / scale), invalid pixels stored as level 0. Valid depths
/// that would round to 0 are stored as level 1. Throws UsageError when
/// max_range / scale exceeds 65535.
Gray16 encode_depth(const DepthMap& depth, double scale_factor);
DepthMap decode_depth(const Gray16& levels, double scale_factor, double max_range,
                      DepthConvention convention = DepthConvention::Spherical);

/// Scale factor (metres per level) for the full 16-bit range.
double full_range_scale(double max_range);

/// Spherical depth rendering of a fronto-parallel plane `distance` metres
/// ahead of a camera at the origin, with nothing else in the scene.
DepthMap render_toy_plane(double distance, const Intrinsics& intrinsics, double max_range);

/// Least-squares metres-per-level factor from an encoded rendering of a
/// fronto-parallel plane at a known distance. Throws DataError if no pixel hit the plane.
double calibrate_scale(const Gray16& toy_levels, const Intrinsics& intrinsics, double plane_distance);

}  // namespace dfnet
