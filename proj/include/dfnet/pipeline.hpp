#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfnet/dataset.hpp"
#include "dfnet/flow.hpp"
#include "dfnet/metrics.hpp"
#include "dfnet/network.hpp"
#include "dfnet/perturb.hpp"

namespace dfnet {

/// Everything a command can be told. Every field is settable by key through
/// set(); config files hold the same keys as `key value` or `key = value` lines.
struct ExperimentConfig {
  // paths
  std::string dataset;
  std::string out;
  std::string checkpoint;
  std::string image;
  std::string prev_image;
  std::string log;

  std::optional<std::uint64_t> seed;

  // generate
  int frames = 100;
  int sequence_length = 50;
  int width = 320;
  int height = 96;
  double max_range = 40.0;
  Difficulty difficulty = Difficulty::UrbanDense;
  double haze_probability = 0.3;
  double blur_probability = 0.3;
  bool straight_line = false;

  // network and training
  NetworkSpec network;
  LossKind loss = LossKind::LogRmse;
  double lr = 1e-3;
  double lr_decay = 0.5;
  int lr_decay_every = 20;
  double momentum = 0.0;
  int epochs = 30;
  int batch_size = 4;
  int max_steps = 0;  // 0: no cap beyond epochs
  int train_limit = 0;  // use only the first N frames; 0: all
  bool init_head_bias = true;

  // evaluation
  double min_depth = 0.5;
  Roi roi = Roi::Full;
  std::string predictor = "network";  // or "gt" (identity debug path)

  FlowParams flow;
  PerturbSpec perturb;
  bool quiet = false;

  /// Throws UsageError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  /// Keys accepted by set(), in documentation order.
  static const std::vector<std::string>& keys();

  /// Key-value text of every non-path setting; basis of config_hash().
  std::string canonical() const;
  std::string config_hash() const;

  DatasetConfig dataset_config() const;
  EvalConfig eval_config() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;  // aggregate over the epoch, before each step's update
  int steps = 0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::string checkpoint;
  int total_steps = 0;
};

/// Network-ready samples held in memory, padded to multiples of 16.
struct TrainingSet {
  std::vector<Tensor<float>> inputs;       // [1,c,Hp,Wp]
  std::vector<std::vector<double>> depth;  // metric gt, Hp*Wp
  std::vector<std::vector<std::uint8_t>> mask;
  CropRecord crop;
  std::size_t size() const { return inputs.size(); }
};

/// Loads frames [0, limit) (all when limit is 0). Flow files are required for the flow variant.
TrainingSet load_training_set(const std::filesystem::path& dir, const SequenceManifest& manifest,
                              const NetworkSpec& spec, const EvalConfig& eval, int limit = 0);

struct TrainSettings {
  LossKind loss = LossKind::LogRmse;
  double lr = 1e-3;
  double lr_decay = 0.5;
  int lr_decay_every = 20;
  double momentum = 0.0;
  int epochs = 30;
  int batch_size = 4;
  int max_steps = 0;
  std::uint64_t seed = 0;  // batch order
  /// Start the depth head's bias at the mean masked log depth of the set.
  bool init_head_bias = true;
};

/// Minibatch SGD over the set. Throws DivergenceError on a non-finite loss.
TrainingLog train_network(Network<float>& net, const TrainingSet& set, const TrainSettings& settings,
                          std::ostream* progress = nullptr);

/// Mean of log depth over all masked pixels of the set.
double mean_log_depth(const TrainingSet& set);

/// Loss of the current parameters over the whole set (all masked pixels pooled).
double dataset_loss(const Network<float>& net, const TrainingSet& set, LossKind loss);

/// Metric depth for one frame, cropped to the original extents.
std::vector<double> predict_depth(const Network<float>& net, const Image& rgb, const FlowField* flow);

MetricsReport evaluate_network(const Network<float>& net, const std::filesystem::path& dir,
                               const SequenceManifest& manifest, const EvalConfig& config);

/// Checkpoint plus the metadata stored in its descriptor.
struct LoadedModel {
  Network<float> net;
  std::map<std::string, std::string> meta;
  double depth_scale() const;
  double max_range() const;
};
LoadedModel load_model(const std::filesystem::path& path);

/// Near is warm (red), far is cool (blue); linear in depth over [min_depth, max_range].
Image depth_colormap(std::span<const double> depth, int width, int height, double min_depth, double max_range);

struct RobustnessTable {
  std::vector<std::string> columns;  // plain, blur3, blur10, darkened
  std::vector<MetricsReport> reports;
  std::string format() const;  // 3-decimal table, 6 metric rows
};

// Commands. Each validates its inputs and throws dfnet::Error subclasses.
SequenceManifest cmd_generate(const ExperimentConfig& cfg);
int cmd_flow(const ExperimentConfig& cfg);
TrainingLog cmd_train(const ExperimentConfig& cfg, std::ostream* progress = nullptr);
MetricsReport cmd_eval(const ExperimentConfig& cfg);
/// Writes <out>_depth.png and <out>_color.png; returns the metric prediction.
std::vector<double> cmd_infer(const ExperimentConfig& cfg);
SequenceManifest cmd_perturb(const ExperimentConfig& cfg);
RobustnessTable cmd_robustness(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

}  // namespace dfnet
