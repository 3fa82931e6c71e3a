#include "dfnet/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfnet/error.hpp"

namespace dfnet {
namespace {

constexpr double kEps = 1e-9;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal;
  Vec3 albedo;
  double texture_scale = 1.0;
  bool ground = false;
};

// Rotation about z by -yaw (world -> box local).
Vec3 unyaw(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x + s * v.y, -s * v.x + c * v.y, v.z};
}

Vec3 reyaw(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

bool intersect_box(const Primitive& p, const Vec3& o, const Vec3& d, double& t_out, Vec3& n_out) {
  const Vec3 lo = unyaw(o - p.center, p.yaw);
  const Vec3 ld = unyaw(d, p.yaw);
  const double oc[3] = {lo.x, lo.y, lo.z}, dc[3] = {ld.x, ld.y, ld.z}, hs[3] = {p.size.x, p.size.y, p.size.z};
  double tmin = -std::numeric_limits<double>::infinity(), tmax = std::numeric_limits<double>::infinity();
  int axis_in = -1, axis_out = -1;
  double sign_in = 0, sign_out = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dc[a]) < 1e-15) {
      if (std::abs(oc[a]) > hs[a]) return false;
      continue;
    }
    double t1 = (-hs[a] - oc[a]) / dc[a], t2 = (hs[a] - oc[a]) / dc[a];
    double s1 = -1, s2 = 1;
    if (t1 > t2) {
      std::swap(t1, t2);
      std::swap(s1, s2);
    }
    if (t1 > tmin) { tmin = t1; axis_in = a; sign_in = s1; }
    if (t2 < tmax) { tmax = t2; axis_out = a; sign_out = s2; }
  }
  if (tmax < tmin) return false;
  double t;
  int axis;
  double sign;
  if (tmin > kEps) {
    t = tmin; axis = axis_in; sign = sign_in;
  } else if (tmax > kEps) {
    t = tmax; axis = axis_out; sign = sign_out;
  } else {
    return false;
  }
  if (axis < 0) return false;
  Vec3 n{0, 0, 0};
  (axis == 0 ? n.x : axis == 1 ? n.y : n.z) = sign;
  t_out = t;
  n_out = reyaw(n, p.yaw);
  return true;
}

bool intersect_cylinder(const Primitive& p, const Vec3& o, const Vec3& d, double& t_out, Vec3& n_out) {
  const Vec3 lo = o - p.center;
  const double r = p.size.x, h = p.size.z;
  double best = std::numeric_limits<double>::infinity();
  Vec3 bn;
  const double a = d.x * d.x + d.y * d.y;
  if (a > 1e-15) {
    const double b = lo.x * d.x + lo.y * d.y;
    const double c = lo.x * lo.x + lo.y * lo.y - r * r;
    const double disc = b * b - a * c;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > kEps && t < best && std::abs(lo.z + t * d.z) <= h) {
          best = t;
          bn = Vec3{lo.x + t * d.x, lo.y + t * d.y, 0.0}.normalized();
          break;
        }
      }
    }
  }
  if (std::abs(d.z) > 1e-15) {
    for (double cap : {-h, h}) {
      const double t = (cap - lo.z) / d.z;
      if (t > kEps && t < best) {
        const double x = lo.x + t * d.x, y = lo.y + t * d.y;
        if (x * x + y * y <= r * r) {
          best = t;
          bn = Vec3{0, 0, cap > 0 ? 1.0 : -1.0};
        }
      }
    }
  }
  if (!std::isfinite(best)) return false;
  t_out = best;
  n_out = bn;
  return true;
}

bool intersect_sphere(const Primitive& p, const Vec3& o, const Vec3& d, double& t_out, Vec3& n_out) {
  const Vec3 oc = o - p.center;
  const double b = oc.dot(d);
  const double c = oc.dot(oc) - p.size.x * p.size.x;
  const double disc = b * b - c;
  if (disc < 0) return false;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= kEps) t = -b + sq;
  if (t <= kEps) return false;
  t_out = t;
  n_out = (oc + d * t).normalized();
  return true;
}

// Cheap rejection against the bounding sphere.
bool may_hit(const Primitive& p, const Vec3& o, const Vec3& d, double t_best) {
  const Vec3 oc = o - p.center;
  const double r = p.bounding_radius() + 1e-6;
  const double b = oc.dot(d);
  const double c = oc.dot(oc) - r * r;
  if (c > 0 && b > 0) return false;
  const double disc = b * b - c;
  if (disc < 0) return false;
  return -b - std::sqrt(disc) < t_best;
}

Hit trace(const Scene& scene, const Vec3& o, const Vec3& d) {
  Hit hit;
  if (scene.has_ground && d.z < -1e-15 && o.z > 0) {
    hit.t = -o.z / d.z;
    hit.normal = {0, 0, 1};
    hit.ground = true;
  }
  for (const auto& p : scene.primitives) {
    if (!may_hit(p, o, d, hit.t)) continue;
    double t;
    Vec3 n;
    bool ok = false;
    switch (p.kind) {
      case PrimitiveKind::Box: ok = intersect_box(p, o, d, t, n); break;
      case PrimitiveKind::Cylinder: ok = intersect_cylinder(p, o, d, t, n); break;
      case PrimitiveKind::Sphere: ok = intersect_sphere(p, o, d, t, n); break;
    }
    if (ok && t < hit.t) {
      hit.t = t;
      hit.normal = n;
      hit.albedo = p.albedo;
      hit.texture_scale = p.texture_scale;
      hit.ground = false;
    }
  }
  return hit;
}

double lattice(std::int64_t x, std::int64_t y, std::int64_t z) {
  std::uint64_t h = std::uint64_t(x) * 0x9e3779b97f4a7c15ull ^ std::uint64_t(y) * 0xc2b2ae3d27d4eb4full ^
                    std::uint64_t(z) * 0x165667b19e3779f9ull;
  h ^= h >> 31;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 29;
  return double(h >> 11) * (1.0 / 9007199254740992.0);
}

double value_noise(const Vec3& p) {
  const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
  const auto ix = std::int64_t(fx), iy = std::int64_t(fy), iz = std::int64_t(fz);
  auto fade = [](double t) { return t * t * (3 - 2 * t); };
  const double tx = fade(p.x - fx), ty = fade(p.y - fy), tz = fade(p.z - fz);
  double acc = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        acc += w * lattice(ix + dx, iy + dy, iz + dz);
      }
  return acc;
}

double texture(const Vec3& p, double scale) {
  const double n = 0.6 * value_noise(p * scale) + 0.4 * value_noise(p * (scale * 3.1) + Vec3{17.3, 5.1, 9.7});
  return 0.55 + 0.45 * n;
}

Vec3 shade(const Scene& scene, const Vec3& origin, const Vec3& dir, const Hit& hit) {
  const Vec3 horizon = scene.horizon_color;
  if (!std::isfinite(hit.t)) {
    const double e = std::sqrt(std::clamp(dir.z, 0.0, 1.0));
    return horizon * (1 - e) + scene.zenith_color * e;
  }
  const Vec3 p = origin + dir * hit.t;
  Vec3 albedo = hit.albedo;
  double tex;
  if (hit.ground) {
    const bool road = std::abs(p.y) < scene.road_half_width;
    albedo = road ? scene.road_albedo : scene.ground_albedo;
    tex = texture(p, road ? 1.3 : 0.8);
    const double along = p.x - 6.0 * std::floor(p.x / 6.0);
    if (std::abs(p.y) < 0.12 && along < 3.0) {
      albedo = {0.85, 0.85, 0.8};
      tex = 1.0;
    }
  } else {
    tex = texture(p, hit.texture_scale);
  }
  Vec3 n = hit.normal;
  if (n.dot(dir) > 0) n = n * -1.0;
  const double lambert = std::max(0.0, n.dot(scene.light_dir));
  const double light = scene.ambient + scene.light_intensity * lambert;
  Vec3 c = albedo * (tex * light);
  if (scene.haze_density > 0) {
    const double k = std::exp(-scene.haze_density * hit.t);
    c = c * k + horizon * (1 - k);
  }
  return c;
}

CameraPose lerp_pose(const CameraPose& a, const CameraPose& b, double s) {
  return CameraPose{a.position + (b.position - a.position) * s, a.roll + (b.roll - a.roll) * s,
                    a.pitch + (b.pitch - a.pitch) * s, a.yaw + (b.yaw - a.yaw) * s};
}

void check_map(const DepthMap& depth, const Intrinsics& k) {
  k.validate();
  if (depth.width != k.width || depth.height != k.height) {
    throw UsageError("depth map extents do not match intrinsics");
  }
}

}  // namespace

std::size_t DepthMap::valid_count() const { return std::size_t(std::count(valid.begin(), valid.end(), 1)); }

std::optional<double> trace_distance(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  const Hit h = trace(scene, origin, dir);
  if (!std::isfinite(h.t)) return std::nullopt;
  return h.t;
}

RenderResult render(const Scene& scene, const CameraPose& pose, const Intrinsics& k, const RenderOptions& options) {
  k.validate();
  if (!(options.max_range > 0)) throw UsageError("max_range must be positive");
  RenderResult out{Image(k.width, k.height, 3), DepthMap(k.width, k.height, DepthConvention::Spherical, options.max_range)};
  const bool blur = options.motion_blur_samples > 1 && options.blur_from.has_value();
  const int samples = blur ? options.motion_blur_samples : 1;
  std::vector<CameraPose> sub;
  for (int s = 0; s < samples; ++s) {
    sub.push_back(blur ? lerp_pose(*options.blur_from, pose, double(s + 1) / samples) : pose);
  }
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const std::size_t i = std::size_t(y) * k.width + x;
      Vec3 color{0, 0, 0};
      for (int s = 0; s < samples; ++s) {
        const Vec3 d = pixel_ray(sub[s], k, x, y);
        const Hit h = trace(scene, sub[s].position, d);
        color = color + shade(scene, sub[s].position, d, h);
        // The final sub-pose is the frame pose and defines ground truth.
        if (s == samples - 1 && std::isfinite(h.t) && h.t <= options.max_range) {
          out.depth.values[i] = h.t;
          out.depth.valid[i] = 1;
        }
      }
      color = color * (1.0 / samples);
      out.rgb.data[i * 3] = float(std::clamp(color.x, 0.0, 1.0));
      out.rgb.data[i * 3 + 1] = float(std::clamp(color.y, 0.0, 1.0));
      out.rgb.data[i * 3 + 2] = float(std::clamp(color.z, 0.0, 1.0));
    }
  }
  return out;
}

double ray_length_factor(const Intrinsics& k, double x, double y) {
  const double a = (x - k.cx) / k.focal, b = (y - k.cy) / k.focal;
  return std::sqrt(1.0 + a * a + b * b);
}

DepthMap spherical_to_planar(const DepthMap& depth, const Intrinsics& k) {
  if (depth.convention != DepthConvention::Spherical) throw UsageError("depth map is not spherical");
  check_map(depth, k);
  DepthMap out = depth;
  out.convention = DepthConvention::Planar;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const std::size_t i = std::size_t(y) * k.width + x;
      out.values[i] = depth.values[i] / ray_length_factor(k, x, y);
    }
  return out;
}

DepthMap planar_to_spherical(const DepthMap& depth, const Intrinsics& k) {
  if (depth.convention != DepthConvention::Planar) throw UsageError("depth map is not planar");
  check_map(depth, k);
  DepthMap out = depth;
  out.convention = DepthConvention::Spherical;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const std::size_t i = std::size_t(y) * k.width + x;
      out.values[i] = depth.values[i] * ray_length_factor(k, x, y);
    }
  return out;
}

double full_range_scale(double max_range) {
  if (!(max_range > 0)) throw UsageError("max_range must be positive");
  return max_range / 65535.0;
}

Gray16 encode_depth(const DepthMap& depth, double scale_factor) {
  if (!(scale_factor > 0)) throw UsageError("scale factor must be positive");
  if (std::llround(depth.max_range / scale_factor) > 65535) {
    throw UsageError("max_range / scale_factor exceeds the 16-bit range");
  }
  Gray16 out{depth.width, depth.height, std::vector<std::uint16_t>(depth.pixel_count(), 0)};
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    if (!depth.valid[i]) continue;
    const long long level = std::llround(depth.values[i] / scale_factor);
    if (level > 65535) throw UsageError("depth value overflows the 16-bit range");
    out.levels[i] = std::uint16_t(std::max(1LL, level));
  }
  return out;
}

DepthMap decode_depth(const Gray16& levels, double scale_factor, double max_range, DepthConvention convention) {
  if (!(scale_factor > 0)) throw UsageError("scale factor must be positive");
  DepthMap out(levels.width, levels.height, convention, max_range);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (levels.levels[i] == 0) continue;
    out.values[i] = levels.levels[i] * scale_factor;
    out.valid[i] = 1;
  }
  return out;
}

DepthMap render_toy_plane(double distance, const Intrinsics& k, double max_range) {
  if (!(distance > 0)) throw UsageError("plane distance must be positive");
  Scene toy;
  toy.has_ground = false;
  Primitive wall;
  wall.kind = PrimitiveKind::Box;
  wall.center = {distance + 0.5, 0.0, 0.0};
  wall.size = {0.5, 1e5, 1e5};
  toy.primitives.push_back(wall);
  RenderOptions opts;
  opts.max_range = max_range;
  return render(toy, CameraPose{}, k, opts).depth;
}

double calibrate_scale(const Gray16& toy_levels, const Intrinsics& k, double plane_distance) {
  k.validate();
  if (toy_levels.width != k.width || toy_levels.height != k.height) {
    throw UsageError("toy rendering extents do not match intrinsics");
  }
  double num = 0, den = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const double level = toy_levels.levels[std::size_t(y) * k.width + x];
      if (level == 0) continue;
      num += level * plane_distance * ray_length_factor(k, x, y);
      den += level * level;
    }
  if (den == 0) throw DataError("toy rendering has no pixels on the calibration plane");
  return num / den;
}

}  // namespace dfnet
