#include "dfnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "dfnet/checkpoint.hpp"
#include "dfnet/error.hpp"

namespace fs = std::filesystem;

namespace dfnet {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw UsageError("option " + key + " expects a number, got '" + v + "'");
  }
  return out;
}

template <typename I>
I to_int(const std::string& key, const std::string& v) {
  I out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("option " + key + " expects an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("option " + key + " expects a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(to_int<int>(key, trim(item)));
  if (out.empty()) throw UsageError("option " + key + " expects a comma-separated list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void require(const std::string& value, const std::string& key, const std::string& command) {
  if (value.empty()) throw UsageError(command + " requires --" + key);
}

void require_seed(const ExperimentConfig& cfg, const std::string& command) {
  if (!cfg.seed) throw UsageError(command + " requires --seed");
}

void require_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir);
}

SequenceManifest dataset_manifest(const std::string& dir) {
  require_dir(dir);
  return read_manifest(fs::path(dir) / "manifest.txt");
}

Tensor<float> frame_input(const Image& rgb, const FlowField* flow, const NetworkSpec& spec, CropRecord* crop) {
  const Tensor<float> img = image_to_tensor<float>(rgb);
  std::vector<const FlowField*> flows;
  if (spec.variant == InputVariant::ImagePlusFlow) {
    if (!flow) throw DataError("the image_plus_flow variant needs a flow field");
    flows.push_back(flow);
  }
  return pad_to_16(assemble_input<float>(img, flows, spec), crop);
}

template <typename V>
std::vector<V> pad_plane(const std::vector<V>& src, int w, int h, const CropRecord& crop) {
  const std::size_t wp = crop.width + crop.pad_right, hp = crop.height + crop.pad_bottom;
  std::vector<V> out(wp * hp, V{});
  for (int y = 0; y < h; ++y) std::copy_n(src.begin() + std::size_t(y) * w, w, out.begin() + std::size_t(y) * wp);
  return out;
}

std::vector<std::string> artifact_comments(const std::string& seed, const std::string& hash) {
  return {"seed " + seed, "config_hash " + hash};
}

Vec3 colormap_at(double t) {
  static const Vec3 stops[5] = {{0.70, 0.00, 0.00}, {1.00, 0.40, 0.00}, {1.00, 0.90, 0.20}, {0.30, 0.80, 0.90},
                                {0.10, 0.20, 0.70}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, int(t));
  const double f = t - i;
  return stops[i] * (1.0 - f) + stops[i + 1] * f;
}

}  // namespace

// ---------------------------------------------------------------- config

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k{
      "dataset",      "in",           "out",          "checkpoint",  "image",           "prev_image",      "log",
      "seed",         "frames",       "sequence_length", "width",       "height",          "max_range",
      "difficulty",   "haze_probability", "blur_probability", "straight_line", "variant",   "encoder_channels",
      "decoder_channels", "loss",     "lr",          "lr_decay",        "lr_decay_every",  "momentum",
      "epochs",       "batch_size",   "max_steps",   "train_limit", "init_head_bias",     "min_depth",       "roi",
      "predictor",    "flow_levels",  "flow_scale",  "flow_iterations", "flow_alpha",      "flow_warps",
      "kind",         "radius",       "max_contrast", "gamma",          "quiet"};
  return k;
}

void ExperimentConfig::set(const std::string& key_in, const std::string& value_in) {
  std::string key = trim(key_in);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(value_in);
  if (key == "dataset" || key == "in") dataset = v;
  else if (key == "out") out = v;
  else if (key == "checkpoint") checkpoint = v;
  else if (key == "image") image = v;
  else if (key == "prev_image") prev_image = v;
  else if (key == "log") log = v;
  else if (key == "seed") seed = to_int<std::uint64_t>(key, v);
  else if (key == "frames") frames = to_int<int>(key, v);
  else if (key == "sequence_length") sequence_length = to_int<int>(key, v);
  else if (key == "width") width = to_int<int>(key, v);
  else if (key == "height") height = to_int<int>(key, v);
  else if (key == "max_range") max_range = to_double(key, v);
  else if (key == "difficulty") difficulty = parse_difficulty(v);
  else if (key == "haze_probability") haze_probability = to_double(key, v);
  else if (key == "blur_probability") blur_probability = to_double(key, v);
  else if (key == "straight_line") straight_line = to_bool(key, v);
  else if (key == "variant") network.variant = parse_input_variant(v);
  else if (key == "encoder_channels") network.encoder_channels = to_int_list(key, v);
  else if (key == "decoder_channels") network.decoder_channels = to_int_list(key, v);
  else if (key == "loss") loss = parse_loss_kind(v);
  else if (key == "lr") lr = to_double(key, v);
  else if (key == "lr_decay") lr_decay = to_double(key, v);
  else if (key == "lr_decay_every") lr_decay_every = to_int<int>(key, v);
  else if (key == "momentum") momentum = to_double(key, v);
  else if (key == "epochs") epochs = to_int<int>(key, v);
  else if (key == "batch_size") batch_size = to_int<int>(key, v);
  else if (key == "max_steps") max_steps = to_int<int>(key, v);
  else if (key == "train_limit") train_limit = to_int<int>(key, v);
  else if (key == "init_head_bias") init_head_bias = to_bool(key, v);
  else if (key == "min_depth") min_depth = to_double(key, v);
  else if (key == "roi") roi = parse_roi(v);
  else if (key == "predictor") {
    if (v != "network" && v != "gt") throw UsageError("predictor must be network or gt");
    predictor = v;
  }
  else if (key == "flow_levels") flow.levels = to_int<int>(key, v);
  else if (key == "flow_scale") flow.scale = to_double(key, v);
  else if (key == "flow_iterations") flow.iterations = to_int<int>(key, v);
  else if (key == "flow_alpha") flow.alpha = to_double(key, v);
  else if (key == "flow_warps") flow.warps = to_int<int>(key, v);
  else if (key == "kind") perturb.kind = parse_perturb_kind(v);
  else if (key == "radius") perturb.blur_radius = to_double(key, v);
  else if (key == "max_contrast") perturb.max_contrast = to_double(key, v);
  else if (key == "gamma") perturb.gamma = to_double(key, v);
  else if (key == "quiet") quiet = to_bool(key, v);
  else throw UsageError("unknown option '" + key_in + "'");
}

void ExperimentConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find_first_of(" \t");
    if (sep == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 'key value'");
    }
    set(line.substr(0, sep), line.substr(sep + 1));
  }
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s << "seed=" << (seed ? std::to_string(*seed) : "none") << "\nframes=" << frames
    << "\nsequence_length=" << sequence_length << "\nwidth=" << width << "\nheight=" << height
    << "\nmax_range=" << fmt(max_range) << "\ndifficulty=" << to_string(difficulty)
    << "\nhaze_probability=" << fmt(haze_probability) << "\nblur_probability=" << fmt(blur_probability)
    << "\nstraight_line=" << straight_line << "\nvariant=" << to_string(network.variant)
    << "\nencoder_channels=" << join(network.encoder_channels) << "\ndecoder_channels="
    << join(network.decoder_channels) << "\nloss=" << to_string(loss) << "\nlr=" << fmt(lr)
    << "\nlr_decay=" << fmt(lr_decay) << "\nlr_decay_every=" << lr_decay_every << "\nmomentum=" << fmt(momentum)
    << "\nepochs=" << epochs << "\nbatch_size=" << batch_size << "\nmax_steps=" << max_steps
    << "\ntrain_limit=" << train_limit << "\ninit_head_bias=" << init_head_bias << "\nmin_depth=" << fmt(min_depth) << "\nroi=" << to_string(roi)
    << "\npredictor=" << predictor << "\nflow_levels=" << flow.levels << "\nflow_scale=" << fmt(flow.scale)
    << "\nflow_iterations=" << flow.iterations << "\nflow_alpha=" << fmt(flow.alpha) << "\nflow_warps=" << flow.warps
    << "\nperturbation=" << perturb.describe() << "\n";
  return s.str();
}

std::string ExperimentConfig::config_hash() const { return fnv1a_hex(canonical()); }

DatasetConfig ExperimentConfig::dataset_config() const {
  DatasetConfig d;
  d.seed = seed.value_or(0);
  d.frames = frames;
  d.sequence_length = sequence_length;
  d.width = width;
  d.height = height;
  d.max_range = max_range;
  d.difficulty = difficulty;
  d.haze_probability = haze_probability;
  d.blur_probability = blur_probability;
  d.straight_line = straight_line;
  return d;
}

EvalConfig ExperimentConfig::eval_config() const { return EvalConfig{min_depth, max_range, roi}; }

// ---------------------------------------------------------------- training

TrainingSet load_training_set(const fs::path& dir, const SequenceManifest& manifest, const NetworkSpec& spec,
                              const EvalConfig& eval, int limit) {
  if (limit < 0) throw UsageError("train_limit must be non-negative");
  const std::size_t n = limit == 0 ? manifest.frames.size() : std::min<std::size_t>(limit, manifest.frames.size());
  if (n == 0) throw DataError("dataset has no frames");
  EvalConfig full = eval;
  full.roi = Roi::Full;
  TrainingSet set;
  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord& f = manifest.frames[i];
    const Image rgb = load_frame_image(dir, f);
    std::optional<FlowField> flow;
    if (spec.variant == InputVariant::ImagePlusFlow) flow = load_frame_flow(dir, f);
    CropRecord crop;
    set.inputs.push_back(frame_input(rgb, flow ? &*flow : nullptr, spec, &crop));
    const DepthMap gt = load_frame_depth(dir, f, manifest);
    if (gt.width != rgb.width || gt.height != rgb.height) throw DataError("depth extents differ from image: " + f.depth);
    set.depth.push_back(pad_plane(gt.values, gt.width, gt.height, crop));
    set.mask.push_back(pad_plane(eval_mask(gt, full), gt.width, gt.height, crop));
    set.crop = crop;
  }
  return set;
}

TrainingLog train_network(Network<float>& net, const TrainingSet& set, const TrainSettings& s, std::ostream* progress) {
  if (set.size() == 0) throw UsageError("empty training set");
  if (s.batch_size < 1 || s.epochs < 1 || s.max_steps < 0) throw UsageError("invalid batch size, epochs or max_steps");
  if (!(s.lr >= 0)) throw UsageError("learning rate must be non-negative");
  SgdOptimizer<float> opt(s.momentum);
  std::mt19937_64 rng(mix_seed(s.seed, 0x5eed));
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Shape& in_shape = set.inputs[0].shape();
  const std::size_t plane = in_shape[2] * in_shape[3];
  const std::size_t chw = in_shape[1] * plane;

  if (s.init_head_bias) {
    Tensor<float>& bias = net.params().get("dec3.bias");
    bias.fill(static_cast<float>(mean_log_depth(set)));
  }
  TrainingLog log;
  net.params().zero_grads();
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, s.lr, s.lr_decay, s.lr_decay_every);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double sq = 0;
    std::size_t count = 0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
      if (s.max_steps > 0 && log.total_steps >= s.max_steps) break;
      const std::size_t b = std::min<std::size_t>(s.batch_size, order.size() - start);
      Tensor<float> batch(Shape{b, in_shape[1], in_shape[2], in_shape[3]});
      std::vector<double> gt(b * plane);
      std::vector<std::uint8_t> mask(b * plane);
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t k = order[start + j];
        std::copy_n(set.inputs[k].raw(), chw, batch.raw() + j * chw);
        std::copy_n(set.depth[k].begin(), plane, gt.begin() + j * plane);
        std::copy_n(set.mask[k].begin(), plane, mask.begin() + j * plane);
      }
      const std::size_t masked = std::size_t(std::count(mask.begin(), mask.end(), 1));
      if (masked == 0) continue;
      ForwardCache<float> cache;
      const PredictionBatch<float> pred = net.forward(batch, &cache);
      const std::vector<double> head(pred.log_depth.raw(), pred.log_depth.raw() + pred.log_depth.size());
      const LossResult loss = compute_loss(s.loss, head, gt, mask);
      if (!std::isfinite(loss.value)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(log.total_steps));
      }
      sq += loss.value * loss.value * double(masked);
      count += masked;
      Tensor<float> grad(pred.log_depth.shape());
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<float>(loss.grad[i]);
      net.backward(cache, grad);
      opt.step(net.params(), lr);
      ++steps;
      ++log.total_steps;
    }
    if (steps == 0) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = std::sqrt(sq / double(count));
    rec.steps = steps;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(rec);
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %3d  lr %.3g  loss %.5f  steps %d  %.1fs\n", epoch, lr, rec.loss, steps,
                    rec.seconds);
      *progress << buf << std::flush;
    }
  }
  return log;
}

double mean_log_depth(const TrainingSet& set) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t p = 0; p < set.mask[i].size(); ++p)
      if (set.mask[i][p]) {
        sum += std::log(set.depth[i][p]);
        ++n;
      }
  if (n == 0) throw DataError("no supervised pixels in the set");
  return sum / double(n);
}

double dataset_loss(const Network<float>& net, const TrainingSet& set, LossKind kind) {
  double sq = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t masked = std::size_t(std::count(set.mask[i].begin(), set.mask[i].end(), 1));
    if (masked == 0) continue;
    const PredictionBatch<float> pred = net.forward(set.inputs[i]);
    const std::vector<double> head(pred.log_depth.raw(), pred.log_depth.raw() + pred.log_depth.size());
    const LossResult loss = compute_loss(kind, head, set.depth[i], set.mask[i]);
    sq += loss.value * loss.value * double(masked);
    count += masked;
  }
  if (count == 0) throw DataError("no supervised pixels in the set");
  return std::sqrt(sq / double(count));
}

std::vector<double> predict_depth(const Network<float>& net, const Image& rgb, const FlowField* flow) {
  CropRecord crop;
  const Tensor<float> input = frame_input(rgb, flow, net.spec(), &crop);
  const PredictionBatch<float> pred = net.forward(input);
  const Tensor<float> log_depth = crop_padding(pred.log_depth, crop);
  std::vector<double> out(log_depth.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(double(log_depth[i]));
  return out;
}

MetricsReport evaluate_network(const Network<float>& net, const fs::path& dir, const SequenceManifest& manifest,
                               const EvalConfig& config) {
  MetricAccumulator acc;
  const bool with_flow = net.spec().variant == InputVariant::ImagePlusFlow;
  for (const auto& f : manifest.frames) {
    const Image rgb = load_frame_image(dir, f);
    std::optional<FlowField> flow;
    if (with_flow) flow = load_frame_flow(dir, f);
    const DepthMap gt = load_frame_depth(dir, f, manifest);
    accumulate_frame(acc, predict_depth(net, rgb, flow ? &*flow : nullptr), gt, config);
  }
  return acc.report();
}

// ---------------------------------------------------------------- model files

double LoadedModel::depth_scale() const {
  const auto it = meta.find("depth_scale");
  return it == meta.end() ? full_range_scale(max_range()) : to_double("depth_scale", it->second);
}

double LoadedModel::max_range() const {
  const auto it = meta.find("max_range");
  return it == meta.end() ? 40.0 : to_double("max_range", it->second);
}

LoadedModel load_model(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path.string());
  Checkpoint ck = load_checkpoint(path);
  std::map<std::string, std::string> meta;
  NetworkSpec spec = parse_descriptor(ck.descriptor, &meta);
  try {
    return LoadedModel{Network<float>(spec, std::move(ck.params)), std::move(meta)};
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint does not match its descriptor: ") + e.what());
  }
}

Image depth_colormap(std::span<const double> depth, int width, int height, double min_depth, double max_range) {
  if (depth.size() != std::size_t(width) * height) throw UsageError("depth size does not match extents");
  if (!(max_range > min_depth)) throw UsageError("invalid colormap range");
  Image out(width, height, 3);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const Vec3 c = colormap_at((depth[i] - min_depth) / (max_range - min_depth));
    out.data[i * 3] = float(c.x);
    out.data[i * 3 + 1] = float(c.y);
    out.data[i * 3 + 2] = float(c.z);
  }
  return out;
}

std::string RobustnessTable::format() const {
  std::ostringstream s;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-16s", "metric");
  s << buf;
  for (const auto& c : columns) {
    std::snprintf(buf, sizeof buf, " %9s", c.c_str());
    s << buf;
  }
  s << "\n";
  const auto& keys = report_keys();
  for (int row = 0; row < 6; ++row) {
    std::snprintf(buf, sizeof buf, "%-16s", keys[row].c_str());
    s << buf;
    for (const auto& r : reports) {
      const double v[6] = {r.delta_1, r.delta_2, r.delta_3, r.rmse, r.log_rmse, r.scale_inv_mse};
      std::snprintf(buf, sizeof buf, " %9.3f", v[row]);
      s << buf;
    }
    s << "\n";
  }
  return s.str();
}

// ---------------------------------------------------------------- commands

SequenceManifest cmd_generate(const ExperimentConfig& cfg) {
  require_seed(cfg, "generate");
  require(cfg.out, "out", "generate");
  return generate_dataset(cfg.dataset_config(), cfg.out);
}

int cmd_flow(const ExperimentConfig& cfg) {
  require(cfg.dataset, "dataset", "flow");
  const SequenceManifest m = dataset_manifest(cfg.dataset);
  return write_dataset_flows(cfg.dataset, m, cfg.flow);
}

TrainingLog cmd_train(const ExperimentConfig& cfg, std::ostream* progress) {
  require_seed(cfg, "train");
  require(cfg.dataset, "dataset", "train");
  require(cfg.out, "out", "train");
  const SequenceManifest m = dataset_manifest(cfg.dataset);
  NetworkSpec spec = cfg.network;
  spec.input_mean = m.channel_means;
  spec.validate();
  EvalConfig eval = cfg.eval_config();
  eval.max_range = m.max_range;
  const TrainingSet set = load_training_set(cfg.dataset, m, spec, eval, cfg.train_limit);

  Network<float> net(spec, *cfg.seed);
  TrainSettings s;
  s.loss = cfg.loss;
  s.lr = cfg.lr;
  s.lr_decay = cfg.lr_decay;
  s.lr_decay_every = cfg.lr_decay_every;
  s.momentum = cfg.momentum;
  s.epochs = cfg.epochs;
  s.batch_size = cfg.batch_size;
  s.max_steps = cfg.max_steps;
  s.seed = *cfg.seed;
  s.init_head_bias = cfg.init_head_bias;
  TrainingLog log = train_network(net, set, s, progress);

  const std::string hash = fnv1a_hex(cfg.canonical() + "|" + m.config_hash);
  const std::string descriptor = spec.to_descriptor() + "; seed=" + std::to_string(*cfg.seed) +
                                 "; config_hash=" + hash + "; depth_scale=" + fmt(m.scale_factor) +
                                 "; max_range=" + fmt(m.max_range) + "; loss=" + to_string(cfg.loss);
  const fs::path ck(cfg.out);
  if (ck.has_parent_path()) fs::create_directories(ck.parent_path());
  save_checkpoint(ck, descriptor, net.params());
  log.checkpoint = ck.string();

  const fs::path log_path = cfg.log.empty() ? fs::path(cfg.out + ".log") : fs::path(cfg.log);
  std::ofstream out(log_path);
  if (!out) throw DataError("cannot write training log " + log_path.string());
  out << "# seed " << *cfg.seed << "\n# config_hash " << hash << "\n# epoch lr loss steps seconds\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << " " << fmt(e.lr) << " " << fmt(e.loss) << " " << e.steps << " " << fmt(e.seconds) << "\n";
  }
  return log;
}

MetricsReport cmd_eval(const ExperimentConfig& cfg) {
  require(cfg.dataset, "dataset", "eval");
  const SequenceManifest m = dataset_manifest(cfg.dataset);
  EvalConfig eval = cfg.eval_config();
  eval.max_range = m.max_range;
  MetricsReport report;
  std::vector<std::string> comments;
  if (cfg.predictor == "gt") {
    MetricAccumulator acc;
    for (const auto& f : m.frames) {
      const DepthMap gt = load_frame_depth(cfg.dataset, f, m);
      accumulate_frame(acc, gt.values, gt, eval);
    }
    report = acc.report();
    comments = artifact_comments(std::to_string(m.seed), m.config_hash);
    comments.push_back("predictor gt");
  } else {
    require(cfg.checkpoint, "checkpoint", "eval");
    const LoadedModel model = load_model(cfg.checkpoint);
    if (model.net.spec().variant == InputVariant::ImagePlusFlow && !fs::is_directory(fs::path(cfg.dataset) / "flow")) {
      throw DataError("checkpoint expects image_plus_flow input but the dataset has no flow/ (run the flow command)");
    }
    report = evaluate_network(model.net, cfg.dataset, m, eval);
    const auto seed = model.meta.count("seed") ? model.meta.at("seed") : std::string("unknown");
    const auto hash = model.meta.count("config_hash") ? model.meta.at("config_hash") : std::string("unknown");
    comments = artifact_comments(seed, hash);
    comments.push_back("dataset_hash " + m.config_hash);
  }
  comments.push_back("roi " + to_string(eval.roi) + ", min_depth " + fmt(eval.min_depth) + ", max_range " +
                     fmt(eval.max_range));
  if (!cfg.out.empty()) write_report(cfg.out, report, comments);
  return report;
}

std::vector<double> cmd_infer(const ExperimentConfig& cfg) {
  require(cfg.checkpoint, "checkpoint", "infer");
  require(cfg.image, "image", "infer");
  require(cfg.out, "out", "infer");
  const LoadedModel model = load_model(cfg.checkpoint);
  if (!fs::exists(cfg.image)) throw DataError("image not found: " + cfg.image);
  const Image rgb = read_png(cfg.image);
  if (rgb.channels != 3) throw DataError("infer expects an RGB image");
  std::optional<FlowField> flow;
  if (model.net.spec().variant == InputVariant::ImagePlusFlow) {
    if (cfg.prev_image.empty()) throw UsageError("this checkpoint needs --prev-image for its flow input");
    if (!fs::exists(cfg.prev_image)) throw DataError("image not found: " + cfg.prev_image);
    const Image prev = read_png(cfg.prev_image);
    if (prev.width != rgb.width || prev.height != rgb.height) throw UsageError("previous image extents differ");
    flow = estimate_flow(to_grayscale(rgb), to_grayscale(prev), cfg.flow);
  } else if (!cfg.prev_image.empty()) {
    throw UsageError("this checkpoint is single-image; --prev-image is not used");
  }
  const double max_range = model.max_range();
  std::vector<double> depth = predict_depth(model.net, rgb, flow ? &*flow : nullptr);
  EvalConfig clamp{cfg.min_depth, max_range, Roi::Full};
  depth = clamp_prediction(depth, clamp);

  DepthMap map(rgb.width, rgb.height, DepthConvention::Spherical, max_range);
  map.values = depth;
  std::fill(map.valid.begin(), map.valid.end(), 1);
  const fs::path base(cfg.out);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  write_png16(cfg.out + "_depth.png", encode_depth(map, model.depth_scale()));
  write_png(cfg.out + "_color.png", depth_colormap(depth, rgb.width, rgb.height, cfg.min_depth, max_range));
  return depth;
}

SequenceManifest cmd_perturb(const ExperimentConfig& cfg) {
  require(cfg.dataset, "dataset", "perturb");
  require(cfg.out, "out", "perturb");
  require_dir(cfg.dataset);
  return perturb_dataset(cfg.dataset, cfg.perturb, cfg.out, cfg.flow);
}

RobustnessTable cmd_robustness(const ExperimentConfig& cfg, std::ostream* progress) {
  require(cfg.checkpoint, "checkpoint", "robustness");
  require(cfg.dataset, "dataset", "robustness");
  require(cfg.out, "out", "robustness");
  const LoadedModel model = load_model(cfg.checkpoint);
  const SequenceManifest m = dataset_manifest(cfg.dataset);
  if (model.net.spec().variant == InputVariant::ImagePlusFlow && !fs::is_directory(fs::path(cfg.dataset) / "flow")) {
    throw DataError("checkpoint expects image_plus_flow input but the dataset has no flow/ (run the flow command)");
  }
  EvalConfig eval = cfg.eval_config();
  eval.max_range = m.max_range;
  const fs::path out(cfg.out);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, PerturbSpec>> columns{{"plain", PerturbSpec::none()},
                                                                 {"blur3", PerturbSpec::blur(3.0)},
                                                                 {"blur10", PerturbSpec::blur(10.0)},
                                                                 {"darkened", PerturbSpec::darken(0.4, 1.5)}};
  const auto seed = model.meta.count("seed") ? model.meta.at("seed") : std::string("unknown");
  const auto hash = model.meta.count("config_hash") ? model.meta.at("config_hash") : std::string("unknown");
  RobustnessTable table;
  for (const auto& [name, spec] : columns) {
    fs::path dir = cfg.dataset;
    SequenceManifest cm = m;
    if (spec.kind != PerturbKind::None) {
      dir = out / name;
      cm = perturb_dataset(cfg.dataset, spec, dir, cfg.flow);
    }
    const MetricsReport r = evaluate_network(model.net, dir, cm, eval);
    auto comments = artifact_comments(seed, hash);
    comments.push_back("dataset_hash " + cm.config_hash);
    comments.push_back("column " + name + " (" + spec.describe() + ")");
    write_report(out / ("report_" + name + ".txt"), r, comments);
    table.columns.push_back(name);
    table.reports.push_back(r);
    if (progress) *progress << "robustness: " << name << " delta_1.25 " << r.delta_1 << "\n" << std::flush;
  }
  std::ofstream t(out / "robustness.txt");
  if (!t) throw DataError("cannot write robustness table");
  t << "# seed " << seed << "\n# config_hash " << hash << "\n" << table.format();
  return table;
}

}  // namespace dfnet
