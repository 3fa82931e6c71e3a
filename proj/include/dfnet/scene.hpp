#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dfnet {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator*(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0 ? *this * (1.0 / n) : *this;
  }
  bool operator==(const Vec3&) const = default;
};

enum class PrimitiveKind { Box, Cylinder, Sphere };

/// World frame: x forward along the default route, y left, z up; metres.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  Vec3 center;
  /// Box: half extents. Cylinder: (radius, radius, half height), vertical axis. Sphere: (radius, radius, radius).
  Vec3 size;
  double yaw = 0.0;  // boxes only, rotation about z
  Vec3 albedo{0.5, 0.5, 0.5};
  double texture_scale = 1.0;  // texture frequency in cycles per metre

  /// Lowest point of the primitive.
  double bottom() const;
  /// Radius of a bounding sphere about `center`.
  double bounding_radius() const;
  bool operator==(const Primitive&) const = default;
};

struct Scene {
  bool has_ground = true;
  Vec3 ground_albedo{0.42, 0.45, 0.38};
  Vec3 road_albedo{0.32, 0.32, 0.34};
  double road_half_width = 4.0;  // corridor kept free of primitives, |y| < road_half_width
  std::vector<Primitive> primitives;
  Vec3 light_dir{0.4, 0.3, 0.87};  // towards the light, unit length
  double light_intensity = 0.9;
  double ambient = 0.35;
  double haze_density = 0.0;  // per metre
  Vec3 horizon_color{0.78, 0.82, 0.88};
  Vec3 zenith_color{0.38, 0.55, 0.85};
  std::uint64_t seed = 0;

  bool operator==(const Scene&) const = default;
};

enum class Difficulty { Sparse, UrbanDense };

std::string to_string(Difficulty d);
Difficulty parse_difficulty(const std::string& s);

struct SceneConfig {
  int sparse_min = 5;
  int sparse_max = 20;
  int dense_min = 50;
  int dense_max = 90;
  double route_length = 160.0;  // metres along +x covered by primitives
  bool photometric_variation = true;
  double haze_probability = 0.3;
};

/// Deterministic in (seed, difficulty, config). Places an end-of-route wall
/// on the optical axis of the default trajectory start, so the forward
/// frustum always intersects at least one primitive.
Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const SceneConfig& config = {});

struct Intrinsics {
  double focal = 1.0;  // pixels
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// focal = 0.6 * width, principal point at the image centre.
  static Intrinsics default_for(int width, int height);
  void validate() const;
  bool operator==(const Intrinsics&) const = default;
};

/// Body frame x forward, y left, z up; orientation applied as yaw (about z),
/// then pitch (about y, positive tilts the view down), then roll (about x).
/// The camera looks along body +x; image x grows to body -y, image y to body -z.
struct CameraPose {
  Vec3 position;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  bool operator==(const CameraPose&) const = default;
};

/// World-space unit ray direction through pixel (px, py).
Vec3 pixel_ray(const CameraPose& pose, const Intrinsics& k, double px, double py);

struct TrajectoryConfig {
  double min_speed = 4.0;  // m/s
  double max_speed = 8.0;  // bound on |velocity|
  double frame_interval = 0.1;  // 10 Hz
  bool straight_line = false;
  double min_roll_amplitude = 20.0 * M_PI / 180.0;
  double max_roll_amplitude = 35.0 * M_PI / 180.0;
  double max_pitch_amplitude = 15.0 * M_PI / 180.0;
  double mean_pitch = 6.0 * M_PI / 180.0;  // slight downward view
  double min_height = 1.2;
  double max_height = 3.0;
};

/// Smooth 6-DoF path along the scene's free corridor. Requires n_frames >= 2.
std::vector<CameraPose> sample_trajectory(const Scene& scene, int n_frames, std::uint64_t seed,
                                          const TrajectoryConfig& config = {});

/// SplitMix64 step, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dfnet
