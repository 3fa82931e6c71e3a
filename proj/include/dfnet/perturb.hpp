#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfnet/image.hpp"

namespace dfnet {

struct FlowParams;
struct SequenceManifest;

enum class PerturbKind { None, Blur, Darken };

std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& s);

/// Degradation applied to evaluation images.
///
/// "Radius" is the Gaussian sigma in pixels (support 3 sigma). Darkening is
/// out = (max_contrast * in)^gamma on [0,1] intensities.
struct PerturbSpec {
  PerturbKind kind = PerturbKind::None;
  double blur_radius = 0.0;
  double max_contrast = 1.0;
  double gamma = 1.0;

  void validate() const;
  std::string describe() const;

  static PerturbSpec none() { return {}; }
  static PerturbSpec blur(double radius) { return {PerturbKind::Blur, radius, 1.0, 1.0}; }
  static PerturbSpec darken(double max_contrast, double gamma) {
    return {PerturbKind::Darken, 0.0, max_contrast, gamma};
  }
};

/// Normalized sampled Gaussian with sigma = radius and half-width ceil(3*sigma).
std::vector<double> gaussian_kernel(double radius);

/// Separable Gaussian blur with replicate-edge boundary. Each channel independently.
Image gaussian_blur(const Image& image, double radius);

/// (max_contrast * in)^gamma clamped to [0,1].
Image darken(const Image& image, double max_contrast, double gamma);

Image apply_perturbation(const Image& image, const PerturbSpec& spec);

/// Writes a transformed copy of the dataset at `in_dir` into `out_dir`:
/// images perturbed (byte-identical copies for kind None), depth files and
/// poses copied untouched, and flows recomputed from the perturbed frames when
/// the source dataset has a flow/ directory.
SequenceManifest perturb_dataset(const std::filesystem::path& in_dir, const PerturbSpec& spec,
                                 const std::filesystem::path& out_dir, const FlowParams& flow_params);

}  // namespace dfnet
