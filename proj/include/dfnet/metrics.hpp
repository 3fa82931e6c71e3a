#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfnet/render.hpp"

namespace dfnet {

/// Loss value with its gradient with respect to the log-depth head.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// sqrt(mean((pred - log gt)^2)) over masked pixels; pred is log-depth.
/// Throws UsageError on size mismatch or an empty mask, DataError on non-positive masked gt.
LossResult loss_log_rmse(std::span<const double> pred_log, std::span<const double> gt,
                         std::span<const std::uint8_t> mask);

/// sqrt(mean((exp(pred) - gt)^2)) over masked pixels, differentiated through exp.
LossResult loss_linear_rmse(std::span<const double> pred_log, std::span<const double> gt,
                            std::span<const std::uint8_t> mask);

enum class LossKind { LogRmse, LinearRmse };
std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);

LossResult compute_loss(LossKind kind, std::span<const double> pred_log, std::span<const double> gt,
                        std::span<const std::uint8_t> mask);

/// Fraction of masked pixels with max(y/y*, y*/y) < thr.
double metric_threshold(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask,
                        double thr);
double metric_rmse(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask);
double metric_log_rmse(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask);
/// 1/n sum d^2 - 1/n^2 (sum d)^2 with d = log y - log y*.
double metric_scale_inv_log_mse(std::span<const double> pred, std::span<const double> gt,
                                std::span<const std::uint8_t> mask);

struct MetricsReport {
  double delta_1 = 0.0;  // thr 1.25
  double delta_2 = 0.0;  // thr 1.25^2
  double delta_3 = 0.0;  // thr 1.25^3
  double rmse = 0.0;
  double log_rmse = 0.0;
  double scale_inv_mse = 0.0;
  std::uint64_t n_pixels = 0;
};

/// Sufficient statistics for the report, mergeable across frames. Sums use
/// Neumaier compensation so merge order changes results only at rounding level.
class MetricAccumulator {
 public:
  void add(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask);
  void merge(const MetricAccumulator& other);
  std::uint64_t count() const { return n_; }
  /// Throws DataError if no pixel was accumulated.
  MetricsReport report() const;

 private:
  struct Sum {
    double s = 0.0, c = 0.0;
    void add(double x);
    void add(const Sum& o);
    double value() const { return s + c; }
  };
  std::uint64_t n_ = 0;
  std::uint64_t within_[3] = {0, 0, 0};
  Sum sq_lin_, sq_log_, sum_log_;
};

enum class Roi { Full, BottomHalf };
std::string to_string(Roi r);
Roi parse_roi(const std::string& s);

struct EvalConfig {
  double min_depth = 0.5;
  double max_range = 40.0;
  Roi roi = Roi::Full;
};

/// Joint mask: gt valid, min_depth < gt <= max_range, inside the ROI.
std::vector<std::uint8_t> eval_mask(const DepthMap& gt, const EvalConfig& config);

/// Prediction values clamped to [min_depth, max_range].
std::vector<double> clamp_prediction(std::span<const double> pred, const EvalConfig& config);

/// Adds one frame to `acc` after clamping and masking.
void accumulate_frame(MetricAccumulator& acc, std::span<const double> pred_metric, const DepthMap& gt,
                      const EvalConfig& config);

/// Stable report keys in file order.
const std::vector<std::string>& report_keys();

/// `key value` lines preceded by `# seed` / `# config_hash` / free comment lines.
std::string format_report(const MetricsReport& report, const std::vector<std::string>& comments = {});
void write_report(const std::filesystem::path& path, const MetricsReport& report,
                  const std::vector<std::string>& comments = {});
MetricsReport parse_report(const std::string& text);

}  // namespace dfnet
