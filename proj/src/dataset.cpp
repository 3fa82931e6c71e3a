#include "dfnet/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "dfnet/error.hpp"

namespace fs = std::filesystem;

namespace dfnet {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad number '" + s + "' for " + what);
  return v;
}

template <typename I>
I parse_int(const std::string& s, const std::string& what) {
  I v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad integer '" + s + "' for " + what);
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

void require_tokens(const std::vector<std::string>& tok, std::size_t n, const std::string& key) {
  if (tok.size() != n) throw DataError("manifest line '" + key + "' expects " + std::to_string(n - 1) + " values");
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return buf;
}

std::string SequenceManifest::flow_path(int index) { return "flow/" + frame_stem(index) + ".flo"; }

bool SequenceManifest::starts_sequence(std::size_t i) const {
  return i == 0 || frames.at(i).sequence != frames.at(i - 1).sequence;
}

void write_manifest(const fs::path& path, const SequenceManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# dfnet dataset manifest\n";
  out << "version " << m.version << "\n";
  out << "seed " << m.seed << "\n";
  out << "config_hash " << m.config_hash << "\n";
  out << "max_range " << fmt(m.max_range) << "\n";
  out << "depth_bits " << m.depth_bits << "\n";
  out << "depth_convention spherical\n";
  out << "scale_factor " << fmt(m.scale_factor) << "\n";
  out << "calibrated_scale " << fmt(m.calibrated_scale) << "\n";
  out << "channel_means " << fmt(m.channel_means[0]) << " " << fmt(m.channel_means[1]) << " "
      << fmt(m.channel_means[2]) << "\n";
  const Intrinsics& k = m.intrinsics;
  out << "intrinsics " << fmt(k.focal) << " " << fmt(k.cx) << " " << fmt(k.cy) << " " << k.width << " " << k.height
      << "\n";
  out << "frame_interval " << fmt(m.frame_interval) << "\n";
  out << "perturbation " << m.perturbation << "\n";
  out << "frame_count " << m.frames.size() << "\n";
  out << "# frame index sequence image depth x y z roll pitch yaw timestamp\n";
  for (const auto& f : m.frames) {
    out << "frame " << f.index << " " << f.sequence << " " << f.image << " " << f.depth << " " << fmt(f.pose.position.x)
        << " " << fmt(f.pose.position.y) << " " << fmt(f.pose.position.z) << " " << fmt(f.pose.roll) << " "
        << fmt(f.pose.pitch) << " " << fmt(f.pose.yaw) << " " << fmt(f.timestamp) << "\n";
  }
  if (!out) throw DataError("failed writing " + path.string());
}

SequenceManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  SequenceManifest m;
  long long declared = -1;
  bool has_intrinsics = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    if (key == "frame") {
      require_tokens(tok, 12, key);
      FrameRecord f;
      f.index = parse_int<int>(tok[1], "frame index");
      f.sequence = parse_int<int>(tok[2], "frame sequence");
      f.image = tok[3];
      f.depth = tok[4];
      f.pose.position = {parse_double(tok[5], "x"), parse_double(tok[6], "y"), parse_double(tok[7], "z")};
      f.pose.roll = parse_double(tok[8], "roll");
      f.pose.pitch = parse_double(tok[9], "pitch");
      f.pose.yaw = parse_double(tok[10], "yaw");
      f.timestamp = parse_double(tok[11], "timestamp");
      m.frames.push_back(f);
    } else if (key == "version") {
      require_tokens(tok, 2, key);
      m.version = parse_int<int>(tok[1], key);
      if (m.version != 1) throw DataError("unsupported manifest version " + tok[1]);
    } else if (key == "seed") {
      require_tokens(tok, 2, key);
      m.seed = parse_int<std::uint64_t>(tok[1], key);
    } else if (key == "config_hash") {
      require_tokens(tok, 2, key);
      m.config_hash = tok[1];
    } else if (key == "max_range") {
      require_tokens(tok, 2, key);
      m.max_range = parse_double(tok[1], key);
    } else if (key == "depth_bits") {
      require_tokens(tok, 2, key);
      m.depth_bits = parse_int<int>(tok[1], key);
      if (m.depth_bits != 16) throw DataError("only 16-bit depth is supported");
    } else if (key == "depth_convention") {
      require_tokens(tok, 2, key);
      if (tok[1] != "spherical") throw DataError("unsupported depth convention " + tok[1]);
    } else if (key == "scale_factor") {
      require_tokens(tok, 2, key);
      m.scale_factor = parse_double(tok[1], key);
    } else if (key == "calibrated_scale") {
      require_tokens(tok, 2, key);
      m.calibrated_scale = parse_double(tok[1], key);
    } else if (key == "channel_means") {
      require_tokens(tok, 4, key);
      for (int c = 0; c < 3; ++c) m.channel_means[c] = parse_double(tok[c + 1], key);
    } else if (key == "intrinsics") {
      require_tokens(tok, 6, key);
      m.intrinsics = Intrinsics{parse_double(tok[1], "focal"), parse_double(tok[2], "cx"), parse_double(tok[3], "cy"),
                                parse_int<int>(tok[4], "width"), parse_int<int>(tok[5], "height")};
      has_intrinsics = true;
    } else if (key == "frame_interval") {
      require_tokens(tok, 2, key);
      m.frame_interval = parse_double(tok[1], key);
    } else if (key == "perturbation") {
      if (tok.size() < 2) throw DataError("manifest line 'perturbation' needs a value");
      m.perturbation = line.substr(line.find(tok[1]));
    } else if (key == "frame_count") {
      require_tokens(tok, 2, key);
      declared = parse_int<long long>(tok[1], key);
    } else {
      throw DataError("unknown manifest key '" + key + "' in " + path.string());
    }
  }
  if (!has_intrinsics) throw DataError("manifest lacks intrinsics: " + path.string());
  if (declared >= 0 && declared != static_cast<long long>(m.frames.size())) {
    throw DataError("manifest declares " + std::to_string(declared) + " frames but lists " +
                    std::to_string(m.frames.size()));
  }
  if (!(m.scale_factor > 0) || !(m.max_range > 0)) throw DataError("manifest has invalid scale or range");
  return m;
}

void DatasetConfig::validate() const {
  if (frames < 1) throw UsageError("frames must be positive");
  if (sequence_length < 2) throw UsageError("sequence_length must be at least 2");
  if (width < 2 || height < 2) throw UsageError("image extents must be at least 2x2");
  if (!(max_range > 0)) throw UsageError("max_range must be positive");
  if (!(haze_probability >= 0 && haze_probability <= 1) || !(blur_probability >= 0 && blur_probability <= 1)) {
    throw UsageError("probabilities must lie in [0,1]");
  }
  if (blur_samples < 1) throw UsageError("blur_samples must be positive");
  if (!(min_speed > 0 && max_speed >= min_speed)) throw UsageError("invalid speed bounds");
}

std::string DatasetConfig::canonical() const {
  std::ostringstream s;
  s << "seed=" << seed << "\nframes=" << frames << "\nsequence_length=" << sequence_length << "\nwidth=" << width
    << "\nheight=" << height << "\nmax_range=" << fmt(max_range) << "\ndifficulty=" << to_string(difficulty)
    << "\nhaze_probability=" << fmt(haze_probability) << "\nblur_probability=" << fmt(blur_probability)
    << "\nblur_samples=" << blur_samples << "\nstraight_line=" << (straight_line ? 1 : 0)
    << "\nmin_speed=" << fmt(min_speed) << "\nmax_speed=" << fmt(max_speed) << "\n";
  return s.str();
}

SequenceManifest generate_dataset(const DatasetConfig& config, const fs::path& dir) {
  config.validate();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "depth");

  SequenceManifest m;
  m.seed = config.seed;
  m.config_hash = fnv1a_hex(config.canonical());
  m.max_range = config.max_range;
  m.scale_factor = full_range_scale(config.max_range);
  m.intrinsics = Intrinsics::default_for(config.width, config.height);

  // Toy-plane calibration at a quarter of the range, through the real encoder.
  const double plane = config.max_range / 4.0;
  m.calibrated_scale =
      calibrate_scale(encode_depth(render_toy_plane(plane, m.intrinsics, config.max_range), m.scale_factor),
                      m.intrinsics, plane);

  SceneConfig scene_cfg;
  scene_cfg.haze_probability = config.haze_probability;
  TrajectoryConfig traj_cfg;
  traj_cfg.straight_line = config.straight_line;
  traj_cfg.min_speed = config.min_speed;
  traj_cfg.max_speed = config.max_speed;

  std::array<double, 3> channel_sum{0, 0, 0};
  std::size_t pixel_total = 0;
  int index = 0;
  for (int seq = 0; index < config.frames; ++seq) {
    const int n = std::min(config.sequence_length, config.frames - index);
    const Scene scene = generate_scene(mix_seed(config.seed, 3 * seq), config.difficulty, scene_cfg);
    const auto poses = sample_trajectory(scene, std::max(n, 2), mix_seed(config.seed, 3 * seq + 1), traj_cfg);
    std::mt19937_64 rng(mix_seed(config.seed, 3 * seq + 2));
    const bool blurred = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < config.blur_probability;

    for (int i = 0; i < n; ++i, ++index) {
      RenderOptions opts;
      opts.max_range = config.max_range;
      if (blurred && i > 0) {
        opts.motion_blur_samples = config.blur_samples;
        opts.blur_from = poses[i - 1];
      }
      const RenderResult r = render(scene, poses[i], m.intrinsics, opts);
      const Image rgb = quantize8(r.rgb);
      FrameRecord f;
      f.index = index;
      f.sequence = seq;
      f.image = "images/" + frame_stem(index) + ".png";
      f.depth = "depth/" + frame_stem(index) + ".png";
      f.pose = poses[i];
      f.timestamp = index * m.frame_interval;
      write_png(dir / f.image, rgb);
      write_png16(dir / f.depth, encode_depth(r.depth, m.scale_factor));
      for (std::size_t p = 0; p < rgb.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c) channel_sum[c] += rgb.data[p * 3 + c];
      pixel_total += rgb.pixel_count();
      m.frames.push_back(std::move(f));
    }
  }
  for (int c = 0; c < 3; ++c) m.channel_means[c] = channel_sum[c] / double(pixel_total);
  write_manifest(dir / "manifest.txt", m);
  return m;
}

int write_dataset_flows(const fs::path& dir, const SequenceManifest& manifest, const FlowParams& params) {
  fs::create_directories(dir / "flow");
  Image prev;
  int written = 0;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    const FrameRecord& f = manifest.frames[i];
    Image curr = to_grayscale(load_frame_image(dir, f));
    FlowField flow = manifest.starts_sequence(i) ? FlowField(curr.width, curr.height) : estimate_flow(curr, prev, params);
    write_flo(dir / SequenceManifest::flow_path(f.index), flow);
    prev = std::move(curr);
    ++written;
  }
  return written;
}

Image load_frame_image(const fs::path& dir, const FrameRecord& frame) {
  Image img = read_png(dir / frame.image);
  if (img.channels != 3) throw DataError("expected an RGB image: " + (dir / frame.image).string());
  return img;
}

DepthMap load_frame_depth(const fs::path& dir, const FrameRecord& frame, const SequenceManifest& manifest) {
  return decode_depth(read_png16(dir / frame.depth), manifest.scale_factor, manifest.max_range);
}

FlowField load_frame_flow(const fs::path& dir, const FrameRecord& frame) {
  const fs::path p = dir / SequenceManifest::flow_path(frame.index);
  if (!fs::exists(p)) throw DataError("missing flow file " + p.string() + " (run the flow command first)");
  return read_flo(p);
}

}  // namespace dfnet
