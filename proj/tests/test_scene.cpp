#include <cmath>
#include <random>

#include "doctest.h"
#include "dfnet/error.hpp"
#include "dfnet/render.hpp"
#include "dfnet/scene.hpp"
#include "oracles.hpp"

using namespace dfnet;

namespace {

Intrinsics small_intrinsics() { return Intrinsics{60.0, 40.0, 30.0, 81, 61}; }

Scene wall_scene(double distance) {
  Scene s;
  s.has_ground = false;
  Primitive wall;
  wall.kind = PrimitiveKind::Box;
  wall.center = {distance + 0.5, 0.0, 0.0};
  wall.size = {0.5, 1e5, 1e5};
  s.primitives.push_back(wall);
  return s;
}

Vec3 body_ray(const Intrinsics& k, double x, double y) {
  return Vec3{1.0, -(x - k.cx) / k.focal, -(y - k.cy) / k.focal}.normalized();
}

}  // namespace

TEST_CASE("scene generation is deterministic and bounded") {
  CHECK(generate_scene(5, Difficulty::UrbanDense) == generate_scene(5, Difficulty::UrbanDense));
  CHECK_FALSE(generate_scene(5, Difficulty::UrbanDense) == generate_scene(6, Difficulty::UrbanDense));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene sparse = generate_scene(seed, Difficulty::Sparse);
    CHECK(sparse.primitives.size() >= 5);
    CHECK(sparse.primitives.size() <= 20);
    const Scene dense = generate_scene(seed, Difficulty::UrbanDense);
    CHECK(dense.primitives.size() >= 50);
    for (const auto& p : dense.primitives) {
      CHECK(p.bottom() >= -1e-9);
      CHECK(std::isfinite(p.center.x + p.center.y + p.center.z));
    }
  }
  CHECK(parse_difficulty("sparse") == Difficulty::Sparse);
  CHECK(parse_difficulty("urban-dense") == Difficulty::UrbanDense);
  CHECK_THROWS_AS(parse_difficulty("medium"), UsageError);
}

TEST_CASE("forward frustum of the default trajectory hits a primitive") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Scene scene = generate_scene(seed, Difficulty::Sparse);
    const auto poses = sample_trajectory(scene, 2, seed);
    scene.has_ground = false;
    const Intrinsics k = Intrinsics::default_for(64, 32);
    const auto r = render(scene, poses[0], k, RenderOptions{1e6});
    CHECK(r.depth.valid_count() > 0);
  }
}

TEST_CASE("trajectory speed bound and smoothness") {
  const Scene scene = generate_scene(1, Difficulty::UrbanDense);
  TrajectoryConfig cfg;
  const auto two = sample_trajectory(scene, 2, 9, cfg);
  REQUIRE(two.size() == 2);
  CHECK((two[1].position - two[0].position).norm() <= cfg.max_speed * cfg.frame_interval + 1e-9);
  const auto poses = sample_trajectory(scene, 200, 9, cfg);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    CHECK((poses[i].position - poses[i - 1].position).norm() <= cfg.max_speed * cfg.frame_interval + 1e-9);
    CHECK(std::abs(poses[i].roll - poses[i - 1].roll) < 0.2);
    CHECK(std::abs(poses[i].pitch - poses[i - 1].pitch) < 0.2);
  }
  CHECK_THROWS_AS(sample_trajectory(scene, 1, 9, cfg), UsageError);
}

TEST_CASE("straight line trajectory keeps orientation") {
  const Scene scene = generate_scene(2, Difficulty::Sparse);
  TrajectoryConfig cfg;
  cfg.straight_line = true;
  const auto poses = sample_trajectory(scene, 30, 4, cfg);
  for (const auto& p : poses) {
    CHECK(p.roll == poses[0].roll);
    CHECK(p.pitch == poses[0].pitch);
    CHECK(p.yaw == poses[0].yaw);
  }
}

TEST_CASE("default trajectories reach large roll") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = generate_scene(seed, Difficulty::UrbanDense);
    const auto poses = sample_trajectory(scene, 100, seed);
    double max_roll = 0;
    for (const auto& p : poses) max_roll = std::max(max_roll, std::abs(p.roll));
    CHECK(max_roll > 15.0 * M_PI / 180.0);
  }
}

TEST_CASE("wall at 10 m") {
  const Intrinsics k = small_intrinsics();
  const auto r = render(wall_scene(10.0), CameraPose{}, k);
  const auto at = [&](int x, int y) { return r.depth.values[std::size_t(y) * k.width + x]; };
  CHECK(at(40, 30) == doctest::Approx(10.0).epsilon(1e-12));
  const double corner = 10.0 * std::sqrt(1 + std::pow(40.0 / 60.0, 2) + std::pow(30.0 / 60.0, 2));
  CHECK(at(0, 0) == doctest::Approx(corner).epsilon(1e-12));
  CHECK(at(80, 60) == doctest::Approx(corner).epsilon(1e-12));
  CHECK(at(0, 0) > 10.0);
  CHECK(r.depth.valid_count() == r.depth.pixel_count());
}

TEST_CASE("empty scene renders sky only") {
  Scene s;
  s.has_ground = false;
  const auto r = render(s, CameraPose{}, small_intrinsics());
  CHECK(r.depth.valid_count() == 0);
  for (float v : r.rgb.data) CHECK(std::isfinite(v));
}

TEST_CASE("sphere depth matches closed form") {
  const Intrinsics k = small_intrinsics();
  Scene s;
  s.has_ground = false;
  Primitive ball;
  ball.kind = PrimitiveKind::Sphere;
  ball.center = {12.0, 1.5, -0.7};
  ball.size = {4.0, 4.0, 4.0};
  s.primitives.push_back(ball);
  const auto r = render(s, CameraPose{}, k, RenderOptions{100.0});
  int hits = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const std::size_t i = std::size_t(y) * k.width + x;
      const auto t = oracle::ray_sphere({0, 0, 0}, body_ray(k, x, y), ball.center, 4.0);
      REQUIRE(bool(r.depth.valid[i]) == t.has_value());
      if (t) {
        ++hits;
        CHECK(std::abs(r.depth.values[i] - *t) < 1e-9);
      }
    }
  CHECK(hits > 100);
}

TEST_CASE("ground depth matches closed form under a rotated pose") {
  const Intrinsics k = small_intrinsics();
  Scene s;
  CameraPose pose;
  pose.position = {3.0, -1.0, 2.0};
  pose.pitch = 0.3;
  pose.roll = 0.25;
  pose.yaw = -0.4;
  const auto r = render(s, pose, k, RenderOptions{200.0});
  int hits = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const std::size_t i = std::size_t(y) * k.width + x;
      const auto t = oracle::ray_ground(pose.position, pixel_ray(pose, k, x, y));
      const bool in_range = t && *t <= 200.0;
      REQUIRE(bool(r.depth.valid[i]) == in_range);
      if (in_range) {
        ++hits;
        CHECK(std::abs(r.depth.values[i] - *t) < 1e-9);
      }
    }
  CHECK(hits > 100);
}

TEST_CASE("pixel ray rotation conventions") {
  const Intrinsics k = small_intrinsics();
  CameraPose down;
  down.pitch = M_PI / 2;
  const Vec3 d = pixel_ray(down, k, k.cx, k.cy);
  CHECK(d.z == doctest::Approx(-1.0));
  CameraPose left;
  left.yaw = M_PI / 2;
  CHECK(pixel_ray(left, k, k.cx, k.cy).y == doctest::Approx(1.0));
  CHECK(pixel_ray(CameraPose{}, k, 0, k.cy).y > 0);
  CHECK(pixel_ray(CameraPose{}, k, k.cx, 0).z > 0);
}

TEST_CASE("depth respects max range") {
  const Intrinsics k = small_intrinsics();
  const auto r = render(wall_scene(50.0), CameraPose{}, k, RenderOptions{40.0});
  CHECK(r.depth.valid_count() == 0);
  const Scene scene = generate_scene(3, Difficulty::UrbanDense);
  const auto poses = sample_trajectory(scene, 5, 3);
  const auto r2 = render(scene, poses[4], Intrinsics::default_for(96, 48), RenderOptions{40.0, 5, poses[3]});
  for (std::size_t i = 0; i < r2.depth.pixel_count(); ++i)
    if (r2.depth.valid[i]) CHECK((r2.depth.values[i] > 0 && r2.depth.values[i] <= 40.0));
}

TEST_CASE("spherical and planar conversions") {
  const Intrinsics k = small_intrinsics();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.6, 39.0);
  DepthMap sph(k.width, k.height, DepthConvention::Spherical, 40.0);
  for (std::size_t i = 0; i < sph.pixel_count(); ++i) {
    sph.values[i] = u(rng);
    sph.valid[i] = 1;
  }
  const DepthMap pl = spherical_to_planar(sph, k);
  CHECK(pl.convention == DepthConvention::Planar);
  const std::size_t centre = 30 * 81 + 40;
  CHECK(pl.values[centre] == sph.values[centre]);
  for (std::size_t i = 0; i < sph.pixel_count(); ++i) CHECK(sph.values[i] >= pl.values[i]);
  const DepthMap back = planar_to_spherical(pl, k);
  double worst = 0;
  for (std::size_t i = 0; i < sph.pixel_count(); ++i) worst = std::max(worst, std::abs(back.values[i] - sph.values[i]));
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(spherical_to_planar(pl, k), UsageError);
  CHECK_THROWS_AS(planar_to_spherical(sph, k), UsageError);

  const Intrinsics wide{40.0, 40.0, 30.0, 81, 61};
  DepthMap one(81, 61, DepthConvention::Spherical, 40.0);
  one.values[30 * 81 + 80] = 10.0;
  one.valid[30 * 81 + 80] = 1;
  CHECK(spherical_to_planar(one, wide).values[30 * 81 + 80] == doctest::Approx(10.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("16-bit depth encoding") {
  const double scale = 40.0 / 65535.0;
  CHECK(full_range_scale(40.0) == scale);
  DepthMap d(4, 1, DepthConvention::Spherical, 40.0);
  d.values = {40.0, 10.0, 0.0, 1e-6};
  d.valid = {1, 1, 0, 1};
  const Gray16 g = encode_depth(d, scale);
  CHECK(g.levels[0] == 65535);
  CHECK(g.levels[2] == 0);
  CHECK(g.levels[3] == 1);
  const DepthMap back = decode_depth(g, scale, 40.0);
  CHECK_FALSE(back.valid[2]);
  CHECK(back.valid[3]);
  CHECK(std::abs(back.values[1] - 10.0) <= scale / 2);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 40.0);
  DepthMap r(64, 32, DepthConvention::Spherical, 40.0);
  for (std::size_t i = 0; i < r.pixel_count(); ++i) {
    r.values[i] = u(rng);
    r.valid[i] = 1;
  }
  const DepthMap rb = decode_depth(encode_depth(r, scale), scale, 40.0);
  double worst = 0;
  for (std::size_t i = 0; i < r.pixel_count(); ++i) worst = std::max(worst, std::abs(rb.values[i] - r.values[i]));
  CHECK(worst <= scale / 2);

  CHECK_THROWS_AS(encode_depth(r, 40.0 / 70000.0), UsageError);
}

TEST_CASE("scale calibration from a toy plane") {
  const Intrinsics k = Intrinsics::default_for(320, 96);
  const double scale = full_range_scale(40.0);
  const DepthMap plane = render_toy_plane(10.0, k, 40.0);
  const double recovered = calibrate_scale(encode_depth(plane, scale), k, 10.0);
  CHECK(std::abs(recovered - scale) / scale < 1e-6);
  const DepthMap decoded = decode_depth(encode_depth(plane, recovered), recovered, 40.0);
  for (std::size_t i = 0; i < plane.pixel_count(); ++i)
    CHECK(std::abs(decoded.values[i] - plane.values[i]) <= recovered / 2);

  const Intrinsics odd = Intrinsics::default_for(65, 33);
  const std::size_t centre = 16 * 65 + 32;
  CHECK(encode_depth(render_toy_plane(40.0, odd, 40.0), scale).levels[centre] == 65535);

  const DepthMap beyond = render_toy_plane(41.0, k, 40.0);
  CHECK(beyond.valid_count() == 0);
  CHECK_THROWS_AS(calibrate_scale(encode_depth(beyond, scale), k, 41.0), DataError);
}
