#include "dfnet/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dfnet/binary_io.hpp"
#include "dfnet/error.hpp"
#include "dfnet/perturb.hpp"

namespace dfnet {
namespace {

constexpr float kFloMagic = 202021.25f;
constexpr int kMinLevelExtent = 8;

// Single-channel double raster used inside the solver.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> px;
  Plane() = default;
  Plane(int w_, int h_) : w(w_), h(h_), px(std::size_t(w_) * h_, 0.0) {}
  double& operator()(int x, int y) { return px[std::size_t(y) * w + x]; }
  double operator()(int x, int y) const { return px[std::size_t(y) * w + x]; }
  double clamped(int x, int y) const { return (*this)(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); }
};

Plane to_plane(const Image& gray, double scale) {
  Plane p(gray.width, gray.height);
  for (std::size_t i = 0; i < p.px.size(); ++i) p.px[i] = gray.data[i] * scale;
  return p;
}

Image to_image(const Plane& p) {
  Image img(p.w, p.h, 1);
  for (std::size_t i = 0; i < p.px.size(); ++i) img.data[i] = static_cast<float>(p.px[i]);
  return img;
}

// Bilinear sample with replicate-edge boundary.
double sample(const Plane& p, double x, double y) {
  x = std::clamp(x, 0.0, double(p.w - 1));
  y = std::clamp(y, 0.0, double(p.h - 1));
  const int x0 = std::min(int(x), p.w - 1), y0 = std::min(int(y), p.h - 1);
  const int x1 = std::min(x0 + 1, p.w - 1), y1 = std::min(y0 + 1, p.h - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * p(x0, y0) + fx * p(x1, y0)) + fy * ((1 - fx) * p(x0, y1) + fx * p(x1, y1));
}

Plane resize(const Plane& src, int w, int h) {
  Plane out(w, h);
  const double sx = double(src.w) / w, sy = double(src.h) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = sample(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

Plane smooth(const Plane& p, double sigma) {
  if (sigma <= 0.0) return p;
  // Kernel values of the blur are intensity-scale independent; route through Image.
  Image img = to_image(p);
  Image b = gaussian_blur(img, sigma);
  Plane out(p.w, p.h);
  for (std::size_t i = 0; i < out.px.size(); ++i) out.px[i] = b.data[i];
  return out;
}

std::vector<Plane> build_pyramid(const Plane& base, const FlowParams& params) {
  std::vector<Plane> pyr{smooth(base, params.presmooth_sigma)};
  // Anti-aliasing sigma for a 1/scale reduction.
  const double sigma = 0.6 * std::sqrt(1.0 / (params.scale * params.scale) - 1.0);
  while (int(pyr.size()) < params.levels) {
    const Plane& last = pyr.back();
    const int w = int(std::lround(last.w * params.scale));
    const int h = int(std::lround(last.h * params.scale));
    if (w < kMinLevelExtent || h < kMinLevelExtent) break;
    pyr.push_back(resize(smooth(last, sigma), w, h));
  }
  return pyr;
}

struct Linearization {
  Plane ix, iy, c;  // data term residual is ix*u + iy*v + c
};

Linearization linearize(const Plane& i1, const Plane& i2, const Plane& u, const Plane& v) {
  const int w = i1.w, h = i1.h;
  Plane warped(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) warped(x, y) = sample(i2, x + u(x, y), y + v(x, y));
  Linearization lin{Plane(w, h), Plane(w, h), Plane(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx1 = 0.5 * (i1.clamped(x + 1, y) - i1.clamped(x - 1, y));
      const double gy1 = 0.5 * (i1.clamped(x, y + 1) - i1.clamped(x, y - 1));
      const double gx2 = 0.5 * (warped.clamped(x + 1, y) - warped.clamped(x - 1, y));
      const double gy2 = 0.5 * (warped.clamped(x, y + 1) - warped.clamped(x, y - 1));
      const double ix = 0.5 * (gx1 + gx2), iy = 0.5 * (gy1 + gy2);
      const double it = warped(x, y) - i1(x, y);
      lin.ix(x, y) = ix;
      lin.iy(x, y) = iy;
      lin.c(x, y) = it - ix * u(x, y) - iy * v(x, y);
    }
  }
  return lin;
}

double energy(const Linearization& lin, const Plane& u, const Plane& v, double alpha2) {
  double data = 0.0, smooth_term = 0.0;
  for (int y = 0; y < u.h; ++y) {
    for (int x = 0; x < u.w; ++x) {
      const double r = lin.ix(x, y) * u(x, y) + lin.iy(x, y) * v(x, y) + lin.c(x, y);
      data += r * r;
      if (x + 1 < u.w) {
        const double du = u(x + 1, y) - u(x, y), dv = v(x + 1, y) - v(x, y);
        smooth_term += du * du + dv * dv;
      }
      if (y + 1 < u.h) {
        const double du = u(x, y + 1) - u(x, y), dv = v(x, y + 1) - v(x, y);
        smooth_term += du * du + dv * dv;
      }
    }
  }
  return data + alpha2 * smooth_term;
}

// One block-SOR sweep: each pixel's (u,v) pair is moved toward the exact
// minimizer of the quadratic energy with its neighbours fixed.
void sor_sweep(const Linearization& lin, Plane& u, Plane& v, double alpha2, double omega) {
  for (int y = 0; y < u.h; ++y) {
    for (int x = 0; x < u.w; ++x) {
      double su = 0.0, sv = 0.0;
      int n = 0;
      if (x > 0) { su += u(x - 1, y); sv += v(x - 1, y); ++n; }
      if (x + 1 < u.w) { su += u(x + 1, y); sv += v(x + 1, y); ++n; }
      if (y > 0) { su += u(x, y - 1); sv += v(x, y - 1); ++n; }
      if (y + 1 < u.h) { su += u(x, y + 1); sv += v(x, y + 1); ++n; }
      const double ix = lin.ix(x, y), iy = lin.iy(x, y), c = lin.c(x, y);
      const double an = alpha2 * n;
      const double a11 = ix * ix + an, a12 = ix * iy, a22 = iy * iy + an;
      const double b1 = alpha2 * su - ix * c, b2 = alpha2 * sv - iy * c;
      const double det = a11 * a22 - a12 * a12;
      if (!(det > 0.0)) continue;
      const double us = (a22 * b1 - a12 * b2) / det;
      const double vs = (a11 * b2 - a12 * b1) / det;
      u(x, y) += omega * (us - u(x, y));
      v(x, y) += omega * (vs - v(x, y));
    }
  }
}

void put_rgb(Image& img, std::size_t i, double r, double g, double b) {
  img.data[i * 3] = float(r);
  img.data[i * 3 + 1] = float(g);
  img.data[i * 3 + 2] = float(b);
}

}  // namespace

double FlowField::mean_magnitude() const {
  if (u.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::hypot(double(u[i]), double(v[i]));
  return s / double(u.size());
}

FlowField estimate_flow(const Image& prev, const Image& curr, const FlowParams& params,
                        FlowDiagnostics* diagnostics) {
  if (prev.width != curr.width || prev.height != curr.height) {
    throw UsageError("flow frames differ in extent: " + std::to_string(prev.width) + "x" +
                     std::to_string(prev.height) + " vs " + std::to_string(curr.width) + "x" +
                     std::to_string(curr.height));
  }
  if (prev.width < 2 || prev.height < 2) throw UsageError("flow frames must be at least 2x2");
  if (params.levels < 1 || params.iterations < 0 || params.warps < 1) throw UsageError("invalid flow parameters");
  if (!(params.scale > 0.0 && params.scale < 1.0)) throw UsageError("pyramid scale must be in (0, 1)");
  if (!(params.alpha > 0.0)) throw UsageError("smoothness weight must be > 0");
  if (!(params.relaxation > 0.0 && params.relaxation < 2.0)) throw UsageError("relaxation must be in (0, 2)");

  // The smoothness weight is calibrated for 8-bit intensity units.
  const std::vector<Plane> pyr1 = build_pyramid(to_plane(to_grayscale(prev), 255.0), params);
  const std::vector<Plane> pyr2 = build_pyramid(to_plane(to_grayscale(curr), 255.0), params);
  const double alpha2 = params.alpha * params.alpha;

  Plane u, v;
  for (int level = int(pyr1.size()) - 1; level >= 0; --level) {
    const Plane& i1 = pyr1[level];
    const Plane& i2 = pyr2[level];
    if (u.px.empty()) {
      u = Plane(i1.w, i1.h);
      v = Plane(i1.w, i1.h);
    } else {
      const double rx = double(i1.w) / u.w, ry = double(i1.h) / u.h;
      u = resize(u, i1.w, i1.h);
      v = resize(v, i1.w, i1.h);
      for (auto& x : u.px) x *= rx;
      for (auto& x : v.px) x *= ry;
    }
    for (int warp = 0; warp < params.warps; ++warp) {
      const Linearization lin = linearize(i1, i2, u, v);
      FlowSolveTrace* trace = nullptr;
      if (diagnostics) {
        diagnostics->solves.push_back(FlowSolveTrace{level, warp, i1.w, i1.h, {}});
        trace = &diagnostics->solves.back();
        trace->energy.push_back(energy(lin, u, v, alpha2));
      }
      for (int it = 0; it < params.iterations; ++it) {
        sor_sweep(lin, u, v, alpha2, params.relaxation);
        if (trace) trace->energy.push_back(energy(lin, u, v, alpha2));
      }
    }
  }

  FlowField out(prev.width, prev.height);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    out.u[i] = static_cast<float>(u.px[i]);
    out.v[i] = static_cast<float>(v.px[i]);
  }
  return out;
}

void write_flo(std::ostream& out, const FlowField& flow) {
  if (flow.u.size() != flow.pixel_count() || flow.v.size() != flow.pixel_count()) {
    throw UsageError("flow field arrays do not match its extents");
  }
  binio::put_f32(out, kFloMagic);
  binio::put_i32(out, flow.width);
  binio::put_i32(out, flow.height);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    binio::put_f32(out, flow.u[i]);
    binio::put_f32(out, flow.v[i]);
  }
  if (!out) throw DataError("failed writing flow");
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open flow file for writing: " + path.string());
  write_flo(out, flow);
}

FlowField read_flo(std::istream& in) {
  const float magic = binio::get_f32(in, "flow magic");
  if (magic != kFloMagic) throw DataError("not a .flo file (bad magic)");
  const std::int32_t w = binio::get_i32(in, "flow width");
  const std::int32_t h = binio::get_i32(in, "flow height");
  if (w < 1 || h < 1 || std::int64_t(w) * h > (1ll << 28)) {
    throw DataError("implausible .flo extents " + std::to_string(w) + "x" + std::to_string(h));
  }
  FlowField flow(w, h);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    flow.u[i] = binio::get_f32(in, "flow payload");
    flow.v[i] = binio::get_f32(in, "flow payload");
  }
  return flow;
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow file: " + path.string());
  try {
    return read_flo(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

double flow_hue(double u, double v) {
  double h = std::atan2(v, u) / (2.0 * std::numbers::pi);
  if (h < 0.0) h += 1.0;
  return h >= 1.0 ? 0.0 : h;
}

Image flow_color_preview(const FlowField& flow) {
  Image out(flow.width, flow.height, 3, 1.0f);
  double max_mag = 0.0;
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) max_mag = std::max(max_mag, std::hypot(double(flow.u[i]), double(flow.v[i])));
  if (max_mag <= 0.0) return out;
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    const double mag = std::hypot(double(flow.u[i]), double(flow.v[i]));
    const double s = std::min(1.0, mag / max_mag);
    const double hue6 = flow_hue(flow.u[i], flow.v[i]) * 6.0;
    const int sector = int(hue6) % 6;
    const double f = hue6 - std::floor(hue6);
    // HSV with value 1.
    const double p = 1.0 - s, q = 1.0 - s * f, t = 1.0 - s * (1.0 - f);
    switch (sector) {
      case 0: put_rgb(out, i, 1.0, t, p); break;
      case 1: put_rgb(out, i, q, 1.0, p); break;
      case 2: put_rgb(out, i, p, 1.0, t); break;
      case 3: put_rgb(out, i, p, q, 1.0); break;
      case 4: put_rgb(out, i, t, p, 1.0); break;
      default: put_rgb(out, i, 1.0, p, q); break;
    }
  }
  return out;
}

}  // namespace dfnet
