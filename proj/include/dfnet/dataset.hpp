#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfnet/flow.hpp"
#include "dfnet/image.hpp"
#include "dfnet/render.hpp"
#include "dfnet/scene.hpp"

namespace dfnet {

/// 64-bit FNV-1a of `text` as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

struct FrameRecord {
  int index = 0;
  int sequence = 0;
  std::string image;  // relative to the dataset root
  std::string depth;
  CameraPose pose;
  double timestamp = 0.0;
};

/// Contents of manifest.txt.
struct SequenceManifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
  double max_range = 40.0;
  int depth_bits = 16;
  double scale_factor = 40.0 / 65535.0;  // metres per level used for encoding
  double calibrated_scale = 0.0;          // recovered from the toy-plane rendering
  std::array<double, 3> channel_means{0.0, 0.0, 0.0};
  Intrinsics intrinsics;
  double frame_interval = 0.1;
  std::string perturbation = "none";
  std::vector<FrameRecord> frames;

  /// Relative path of the flow file anchored at a frame.
  static std::string flow_path(int index);
  /// True when frame i starts a sequence (no predecessor in the same sequence).
  bool starts_sequence(std::size_t i) const;
};

void write_manifest(const std::filesystem::path& path, const SequenceManifest& manifest);
/// Throws DataError on missing files or malformed lines.
SequenceManifest read_manifest(const std::filesystem::path& path);

struct DatasetConfig {
  std::uint64_t seed = 0;
  int frames = 100;
  int sequence_length = 50;
  int width = 320;
  int height = 96;
  double max_range = 40.0;
  Difficulty difficulty = Difficulty::UrbanDense;
  double haze_probability = 0.3;
  double blur_probability = 0.3;  // per sequence
  int blur_samples = 5;
  bool straight_line = false;
  double min_speed = 4.0;
  double max_speed = 8.0;

  void validate() const;
  /// Canonical key-value text; the basis of the config hash.
  std::string canonical() const;
};

/// Renders the dataset into `dir` (images/, depth/, manifest.txt). Output bytes
/// depend only on the config.
SequenceManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir);

/// Writes flow/NNNNNN.flo for every frame: the field anchored at frame i points
/// to frame i-1 of the same sequence; sequence starts get zero flow.
int write_dataset_flows(const std::filesystem::path& dir, const SequenceManifest& manifest,
                        const FlowParams& params = {});

Image load_frame_image(const std::filesystem::path& dir, const FrameRecord& frame);
DepthMap load_frame_depth(const std::filesystem::path& dir, const FrameRecord& frame, const SequenceManifest& manifest);
FlowField load_frame_flow(const std::filesystem::path& dir, const FrameRecord& frame);

std::string frame_stem(int index);

}  // namespace dfnet
