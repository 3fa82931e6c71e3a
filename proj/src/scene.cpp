#include "dfnet/scene.hpp"

#include <algorithm>
#include <random>

#include "dfnet/error.hpp"

namespace dfnet {
namespace {

Vec3 rotate(const CameraPose& pose, const Vec3& d) {
  const double cr = std::cos(pose.roll), sr = std::sin(pose.roll);
  const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  // Rx(roll)
  const Vec3 a{d.x, cr * d.y - sr * d.z, sr * d.y + cr * d.z};
  // Ry(pitch)
  const Vec3 b{cp * a.x + sp * a.z, a.y, -sp * a.x + cp * a.z};
  // Rz(yaw)
  return {cy * b.x - sy * b.y, sy * b.x + cy * b.y, b.z};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Vec3 random_albedo(std::mt19937_64& rng, double lo, double hi) {
  const double base = uniform(rng, lo, hi);
  return {std::clamp(base + uniform(rng, -0.12, 0.12), 0.05, 0.95), std::clamp(base + uniform(rng, -0.12, 0.12), 0.05, 0.95),
          std::clamp(base + uniform(rng, -0.12, 0.12), 0.05, 0.95)};
}

// Keeps a primitive's footprint off the corridor.
double lateral_offset(std::mt19937_64& rng, double road_half_width, double footprint, double spread) {
  const double side = rng() & 1 ? 1.0 : -1.0;
  return side * (road_half_width + 0.5 + footprint + uniform(rng, 0.0, spread));
}

Primitive make_building(std::mt19937_64& rng, double x, double road, double spread) {
  Primitive p;
  p.kind = PrimitiveKind::Box;
  p.size = {uniform(rng, 1.5, 6.0), uniform(rng, 1.5, 6.0), uniform(rng, 1.5, 10.0)};
  p.yaw = uniform(rng, -0.3, 0.3);
  const double footprint = std::hypot(p.size.x, p.size.y);
  p.center = {x, lateral_offset(rng, road, footprint, spread), p.size.z};
  p.albedo = random_albedo(rng, 0.3, 0.8);
  p.texture_scale = uniform(rng, 0.5, 1.5);
  return p;
}

Primitive make_pole(std::mt19937_64& rng, double x, double road, double spread) {
  Primitive p;
  p.kind = PrimitiveKind::Cylinder;
  const double r = uniform(rng, 0.15, 0.6);
  const double half_h = uniform(rng, 1.5, 4.5);
  p.size = {r, r, half_h};
  p.center = {x, lateral_offset(rng, road, r, spread), half_h};
  p.albedo = random_albedo(rng, 0.2, 0.6);
  p.texture_scale = uniform(rng, 1.0, 3.0);
  return p;
}

Primitive make_sphere(std::mt19937_64& rng, double x, double road, double spread) {
  Primitive p;
  p.kind = PrimitiveKind::Sphere;
  const double r = uniform(rng, 0.6, 2.5);
  p.size = {r, r, r};
  p.center = {x, lateral_offset(rng, road, r, spread), r + uniform(rng, 0.0, 3.0)};
  p.albedo = random_albedo(rng, 0.25, 0.7);
  p.texture_scale = uniform(rng, 0.8, 2.0);
  return p;
}

}  // namespace

double Primitive::bottom() const {
  if (kind == PrimitiveKind::Box) return center.z - size.z;
  if (kind == PrimitiveKind::Cylinder) return center.z - size.z;
  return center.z - size.x;
}

double Primitive::bounding_radius() const {
  if (kind == PrimitiveKind::Sphere) return size.x;
  if (kind == PrimitiveKind::Cylinder) return std::hypot(size.x, size.z);
  return size.norm();
}

std::string to_string(Difficulty d) { return d == Difficulty::Sparse ? "sparse" : "urban-dense"; }

Difficulty parse_difficulty(const std::string& s) {
  if (s == "sparse") return Difficulty::Sparse;
  if (s == "urban-dense" || s == "dense") return Difficulty::UrbanDense;
  throw UsageError("unknown difficulty '" + s + "' (expected sparse or urban-dense)");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const SceneConfig& config) {
  if (config.sparse_min < 1 || config.sparse_max < config.sparse_min || config.dense_min < 1 ||
      config.dense_max < config.dense_min) {
    throw UsageError("invalid primitive count bounds");
  }
  std::mt19937_64 rng(seed);
  Scene scene;
  scene.seed = seed;
  const bool dense = difficulty == Difficulty::UrbanDense;
  const int count = dense ? uniform_int(rng, config.dense_min, config.dense_max)
                          : uniform_int(rng, config.sparse_min, config.sparse_max);
  const double spread = dense ? 6.0 : 14.0;

  // End-of-route wall across the corridor; counts towards the primitive total.
  Primitive wall;
  wall.kind = PrimitiveKind::Box;
  wall.size = {1.0, scene.road_half_width + 20.0, 12.0};
  wall.center = {config.route_length + 10.0, 0.0, wall.size.z};
  wall.albedo = random_albedo(rng, 0.4, 0.7);
  wall.texture_scale = 0.7;
  scene.primitives.push_back(wall);

  for (int i = 1; i < count; ++i) {
    const double x = uniform(rng, -5.0, config.route_length);
    const double pick = uniform(rng, 0.0, 1.0);
    if (pick < 0.5) {
      scene.primitives.push_back(make_building(rng, x, scene.road_half_width, spread));
    } else if (pick < 0.8) {
      scene.primitives.push_back(make_pole(rng, x, scene.road_half_width, spread));
    } else {
      scene.primitives.push_back(make_sphere(rng, x, scene.road_half_width, spread));
    }
  }

  if (config.photometric_variation) {
    const double az = uniform(rng, 0.0, 2.0 * M_PI);
    const double el = uniform(rng, 0.25, 1.2);
    scene.light_dir = Vec3{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)}.normalized();
    scene.light_intensity = uniform(rng, 0.55, 1.1);
    scene.ambient = uniform(rng, 0.2, 0.45);
    scene.ground_albedo = random_albedo(rng, 0.3, 0.5);
    scene.haze_density = uniform(rng, 0.0, 1.0) < config.haze_probability ? uniform(rng, 0.01, 0.05) : 0.0;
    const double tint = uniform(rng, -0.08, 0.08);
    scene.horizon_color = {0.78 + tint, 0.82 + tint, 0.88 - tint};
  }
  return scene;
}

Intrinsics Intrinsics::default_for(int width, int height) {
  return Intrinsics{0.6 * width, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

void Intrinsics::validate() const {
  if (width < 1 || height < 1) throw UsageError("image extents must be positive");
  if (!(focal > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) throw UsageError("invalid intrinsics");
}

Vec3 pixel_ray(const CameraPose& pose, const Intrinsics& k, double px, double py) {
  const Vec3 body{1.0, -(px - k.cx) / k.focal, -(py - k.cy) / k.focal};
  return rotate(pose, body).normalized();
}

std::vector<CameraPose> sample_trajectory(const Scene& scene, int n_frames, std::uint64_t seed,
                                          const TrajectoryConfig& config) {
  if (n_frames < 2) throw UsageError("a trajectory needs at least 2 frames");
  if (!(config.max_speed >= config.min_speed && config.min_speed > 0.0)) throw UsageError("invalid speed bounds");
  std::mt19937_64 rng(seed);
  const double speed = uniform(rng, config.min_speed, config.max_speed);
  const double height = uniform(rng, config.min_height, config.max_height);
  std::vector<CameraPose> poses;
  poses.reserve(n_frames);

  if (config.straight_line) {
    for (int i = 0; i < n_frames; ++i) {
      const double t = i * config.frame_interval;
      poses.push_back(CameraPose{{speed * t, 0.0, height}, 0.0, 0.0, 0.0});
    }
    return poses;
  }

  // Sinusoidal lateral and vertical weaving. The forward speed is reduced by
  // the weaving speed bounds so that |velocity| <= speed <= max_speed.
  const double lat_amp = uniform(rng, 0.0, std::max(0.0, scene.road_half_width - 1.5));
  const double lat_w = uniform(rng, 0.3, 0.8);
  const double vert_amp = std::min(uniform(rng, 0.0, 0.6), height - 0.6);
  const double vert_w = uniform(rng, 0.3, 0.9);
  const double forward = std::max(0.2 * speed, speed - lat_amp * lat_w - vert_amp * vert_w);
  const double roll_amp = uniform(rng, config.min_roll_amplitude, config.max_roll_amplitude);
  // Roll period between 3 and 6 s so any 10 s window sees a full swing.
  const double roll_w = 2.0 * M_PI / uniform(rng, 3.0, 6.0);
  const double pitch_amp = uniform(rng, 0.0, config.max_pitch_amplitude);
  const double pitch_w = uniform(rng, 0.5, 1.5);
  const double yaw_amp = uniform(rng, 0.0, 0.2);
  const double yaw_w = uniform(rng, 0.2, 0.7);
  const double ph[5] = {uniform(rng, 0, 2 * M_PI), uniform(rng, 0, 2 * M_PI), uniform(rng, 0, 2 * M_PI),
                        uniform(rng, 0, 2 * M_PI), uniform(rng, 0, 2 * M_PI)};

  for (int i = 0; i < n_frames; ++i) {
    const double t = i * config.frame_interval;
    CameraPose p;
    p.position = {forward * t, lat_amp * std::sin(lat_w * t + ph[0]), height + vert_amp * std::sin(vert_w * t + ph[1])};
    p.roll = roll_amp * std::sin(roll_w * t + ph[2]);
    p.pitch = config.mean_pitch + pitch_amp * std::sin(pitch_w * t + ph[3]);
    p.yaw = yaw_amp * std::sin(yaw_w * t + ph[4]);
    poses.push_back(p);
  }
  return poses;
}

}  // namespace dfnet
