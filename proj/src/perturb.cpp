#include "dfnet/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dfnet/error.hpp"

namespace dfnet {

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::None: return "none";
    case PerturbKind::Blur: return "blur";
    case PerturbKind::Darken: return "darken";
  }
  return "none";
}

PerturbKind parse_perturb_kind(const std::string& s) {
  if (s == "none") return PerturbKind::None;
  if (s == "blur") return PerturbKind::Blur;
  if (s == "darken") return PerturbKind::Darken;
  throw UsageError("unknown perturbation kind '" + s + "' (expected none, blur or darken)");
}

void PerturbSpec::validate() const {
  if (kind == PerturbKind::Blur && !(blur_radius > 0.0)) throw UsageError("blur radius must be > 0");
  if (kind == PerturbKind::Darken) {
    if (!(max_contrast > 0.0 && max_contrast <= 1.0)) throw UsageError("max_contrast must be in (0, 1]");
    if (!(gamma > 0.0)) throw UsageError("gamma must be > 0");
  }
}

std::string PerturbSpec::describe() const {
  char buf[96];
  switch (kind) {
    case PerturbKind::Blur: std::snprintf(buf, sizeof buf, "blur radius=%g", blur_radius); break;
    case PerturbKind::Darken:
      std::snprintf(buf, sizeof buf, "darken max_contrast=%g gamma=%g", max_contrast, gamma);
      break;
    default: std::snprintf(buf, sizeof buf, "none");
  }
  return buf;
}

std::vector<double> gaussian_kernel(double radius) {
  if (!(radius > 0.0)) throw UsageError("blur radius must be > 0");
  const int half = static_cast<int>(std::ceil(3.0 * radius));
  std::vector<double> k(2 * half + 1);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * (i * i) / (radius * radius));
    sum += k[i + half];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& image, double radius) {
  const std::vector<double> k = gaussian_kernel(radius);
  const int half = int(k.size() / 2);
  const int w = image.width, h = image.height, c = image.channels;
  std::vector<double> tmp(image.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += k[i + half] * image.data[(std::size_t(y) * w + xx) * c + ch];
        }
        tmp[(std::size_t(y) * w + x) * c + ch] = acc;
      }
    }
  }
  Image out(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += k[i + half] * tmp[(std::size_t(yy) * w + x) * c + ch];
        }
        out.data[(std::size_t(y) * w + x) * c + ch] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image darken(const Image& image, double max_contrast, double gamma) {
  Image out = image;
  for (auto& v : out.data) {
    const double in = std::clamp(double(v), 0.0, 1.0);
    v = static_cast<float>(std::clamp(std::pow(max_contrast * in, gamma), 0.0, 1.0));
  }
  return out;
}

Image apply_perturbation(const Image& image, const PerturbSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case PerturbKind::Blur: return gaussian_blur(image, spec.blur_radius);
    case PerturbKind::Darken: return darken(image, spec.max_contrast, spec.gamma);
    default: return image;
  }
}

}  // namespace dfnet
