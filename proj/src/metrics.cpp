#include "dfnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dfnet/error.hpp"

namespace dfnet {
namespace {

constexpr double kThresholds[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};

void check_sizes(std::size_t a, std::size_t b, std::size_t m) {
  if (a != b || a != m) throw UsageError("prediction, ground truth and mask sizes differ");
}

std::size_t masked_count(std::span<const std::uint8_t> mask) {
  const auto n = std::size_t(std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
  if (n == 0) throw UsageError("empty evaluation mask");
  return n;
}

void check_positive(double y, double gt) {
  if (!(y > 0) || !(gt > 0)) throw DataError("masked depths must be strictly positive");
}

LossResult finish_loss(std::vector<double> residual, std::vector<double> scale, std::size_t n) {
  double sq = 0;
  for (double r : residual) sq += r * r;
  LossResult out;
  out.value = std::sqrt(sq / double(n));
  out.grad.assign(residual.size(), 0.0);
  if (out.value > 0) {
    const double k = 1.0 / (double(n) * out.value);
    for (std::size_t i = 0; i < residual.size(); ++i) out.grad[i] = residual[i] * scale[i] * k;
  }
  return out;
}

}  // namespace

LossResult loss_log_rmse(std::span<const double> pred_log, std::span<const double> gt,
                         std::span<const std::uint8_t> mask) {
  check_sizes(pred_log.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  std::vector<double> r(pred_log.size(), 0.0), s(pred_log.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!mask[i]) continue;
    if (!(gt[i] > 0)) throw DataError("masked ground truth must be positive");
    r[i] = pred_log[i] - std::log(gt[i]);
    s[i] = 1.0;
  }
  return finish_loss(std::move(r), std::move(s), n);
}

LossResult loss_linear_rmse(std::span<const double> pred_log, std::span<const double> gt,
                            std::span<const std::uint8_t> mask) {
  check_sizes(pred_log.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  std::vector<double> r(pred_log.size(), 0.0), s(pred_log.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!mask[i]) continue;
    if (!(gt[i] > 0)) throw DataError("masked ground truth must be positive");
    const double y = std::exp(pred_log[i]);
    r[i] = y - gt[i];
    s[i] = y;
  }
  return finish_loss(std::move(r), std::move(s), n);
}

std::string to_string(LossKind k) { return k == LossKind::LogRmse ? "log_rmse" : "linear_rmse"; }

LossKind parse_loss_kind(const std::string& s) {
  if (s == "log_rmse" || s == "log") return LossKind::LogRmse;
  if (s == "linear_rmse" || s == "linear") return LossKind::LinearRmse;
  throw UsageError("unknown loss '" + s + "' (expected log_rmse or linear_rmse)");
}

LossResult compute_loss(LossKind kind, std::span<const double> pred_log, std::span<const double> gt,
                        std::span<const std::uint8_t> mask) {
  return kind == LossKind::LogRmse ? loss_log_rmse(pred_log, gt, mask) : loss_linear_rmse(pred_log, gt, mask);
}

double metric_threshold(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask,
                        double thr) {
  check_sizes(pred.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    check_positive(pred[i], gt[i]);
    if (std::max(pred[i] / gt[i], gt[i] / pred[i]) < thr) ++hit;
  }
  return double(hit) / double(n);
}

double metric_rmse(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask) {
  check_sizes(pred.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  double sq = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = pred[i] - gt[i];
    sq += d * d;
  }
  return std::sqrt(sq / double(n));
}

double metric_log_rmse(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> mask) {
  check_sizes(pred.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  double sq = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    check_positive(pred[i], gt[i]);
    const double d = std::log(pred[i]) - std::log(gt[i]);
    sq += d * d;
  }
  return std::sqrt(sq / double(n));
}

double metric_scale_inv_log_mse(std::span<const double> pred, std::span<const double> gt,
                                std::span<const std::uint8_t> mask) {
  check_sizes(pred.size(), gt.size(), mask.size());
  const std::size_t n = masked_count(mask);
  double s = 0, sq = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    check_positive(pred[i], gt[i]);
    const double d = std::log(pred[i]) - std::log(gt[i]);
    s += d;
    sq += d * d;
  }
  const double nn = double(n);
  return sq / nn - (s * s) / (nn * nn);
}

void MetricAccumulator::Sum::add(double x) {
  const double t = s + x;
  if (std::abs(s) >= std::abs(x)) {
    c += (s - t) + x;
  } else {
    c += (x - t) + s;
  }
  s = t;
}

void MetricAccumulator::Sum::add(const Sum& o) {
  add(o.s);
  add(o.c);
}

void MetricAccumulator::add(std::span<const double> pred, std::span<const double> gt,
                            std::span<const std::uint8_t> mask) {
  check_sizes(pred.size(), gt.size(), mask.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    check_positive(pred[i], gt[i]);
    const double ratio = std::max(pred[i] / gt[i], gt[i] / pred[i]);
    for (int t = 0; t < 3; ++t)
      if (ratio < kThresholds[t]) ++within_[t];
    const double lin = pred[i] - gt[i];
    const double d = std::log(pred[i]) - std::log(gt[i]);
    sq_lin_.add(lin * lin);
    sq_log_.add(d * d);
    sum_log_.add(d);
    ++n_;
  }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  n_ += other.n_;
  for (int t = 0; t < 3; ++t) within_[t] += other.within_[t];
  sq_lin_.add(other.sq_lin_);
  sq_log_.add(other.sq_log_);
  sum_log_.add(other.sum_log_);
}

MetricsReport MetricAccumulator::report() const {
  if (n_ == 0) throw DataError("no valid pixels to evaluate");
  const double n = double(n_);
  MetricsReport r;
  r.delta_1 = double(within_[0]) / n;
  r.delta_2 = double(within_[1]) / n;
  r.delta_3 = double(within_[2]) / n;
  r.rmse = std::sqrt(sq_lin_.value() / n);
  r.log_rmse = std::sqrt(sq_log_.value() / n);
  const double s = sum_log_.value();
  r.scale_inv_mse = sq_log_.value() / n - (s * s) / (n * n);
  r.n_pixels = n_;
  return r;
}

std::string to_string(Roi r) { return r == Roi::Full ? "full" : "bottom_half"; }

Roi parse_roi(const std::string& s) {
  if (s == "full") return Roi::Full;
  if (s == "bottom_half" || s == "bottom-half") return Roi::BottomHalf;
  throw UsageError("unknown roi '" + s + "' (expected full or bottom_half)");
}

std::vector<std::uint8_t> eval_mask(const DepthMap& gt, const EvalConfig& config) {
  if (!(config.min_depth >= 0) || !(config.max_range > config.min_depth)) throw UsageError("invalid depth range");
  std::vector<std::uint8_t> mask(gt.pixel_count(), 0);
  const int first_row = config.roi == Roi::BottomHalf ? gt.height / 2 : 0;
  for (int y = first_row; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      const std::size_t i = std::size_t(y) * gt.width + x;
      const double d = gt.values[i];
      mask[i] = gt.valid[i] && d > config.min_depth && d <= config.max_range;
    }
  return mask;
}

std::vector<double> clamp_prediction(std::span<const double> pred, const EvalConfig& config) {
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double v = std::isnan(pred[i]) ? config.min_depth : pred[i];
    out[i] = std::clamp(v, config.min_depth, config.max_range);
  }
  return out;
}

void accumulate_frame(MetricAccumulator& acc, std::span<const double> pred_metric, const DepthMap& gt,
                      const EvalConfig& config) {
  if (pred_metric.size() != gt.pixel_count()) throw UsageError("prediction extents differ from ground truth");
  const auto mask = eval_mask(gt, config);
  const auto pred = clamp_prediction(pred_metric, config);
  acc.add(pred, gt.values, mask);
}

const std::vector<std::string>& report_keys() {
  static const std::vector<std::string> keys{"delta_1.25", "delta_1.5625", "delta_1.953125", "rmse",
                                             "log_rmse",   "scale_inv_mse", "n_pixels"};
  return keys;
}

std::string format_report(const MetricsReport& r, const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  char buf[64];
  const double vals[6] = {r.delta_1, r.delta_2, r.delta_3, r.rmse, r.log_rmse, r.scale_inv_mse};
  for (int i = 0; i < 6; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
    out << report_keys()[i] << " " << buf << "\n";
  }
  out << "n_pixels " << r.n_pixels << "\n";
  return out.str();
}

void write_report(const std::filesystem::path& path, const MetricsReport& report,
                  const std::vector<std::string>& comments) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_report(report, comments);
  if (!out) throw DataError("failed writing " + path.string());
}

MetricsReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    kv[k] = v;
  }
  for (const auto& k : report_keys())
    if (!kv.count(k)) throw DataError("report lacks key " + k);
  MetricsReport r;
  r.delta_1 = std::stod(kv["delta_1.25"]);
  r.delta_2 = std::stod(kv["delta_1.5625"]);
  r.delta_3 = std::stod(kv["delta_1.953125"]);
  r.rmse = std::stod(kv["rmse"]);
  r.log_rmse = std::stod(kv["log_rmse"]);
  r.scale_inv_mse = std::stod(kv["scale_inv_mse"]);
  r.n_pixels = std::stoull(kv["n_pixels"]);
  return r;
}

}  // namespace dfnet
