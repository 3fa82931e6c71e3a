#include "dfnet/dfnet.h"

#include <cstring>
#include <exception>
#include <iostream>
#include <new>
#include <string>

#include "dfnet/error.hpp"
#include "dfnet/pipeline.hpp"

struct df_config {
  dfnet::ExperimentConfig cfg;
};

struct df_model {
  dfnet::LoadedModel model;
};

namespace {

thread_local std::string g_last_error;

df_status status_of(dfnet::ErrorKind kind) {
  switch (kind) {
    case dfnet::ErrorKind::Usage: return DF_ERR_USAGE;
    case dfnet::ErrorKind::Data: return DF_ERR_DATA;
    case dfnet::ErrorKind::Divergence: return DF_ERR_DIVERGED;
  }
  return DF_ERR_INTERNAL;
}

template <typename Fn>
df_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DF_OK;
  } catch (const dfnet::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DF_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DF_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* what) {
  if (!p) throw dfnet::UsageError(std::string(what) + " must not be NULL");
}

void require_extents(int width, int height) {
  if (width < 1 || height < 1) throw dfnet::UsageError("extents must be positive");
}

void fill(df_metrics* out, const dfnet::MetricsReport& r) {
  out->delta_1 = r.delta_1;
  out->delta_2 = r.delta_2;
  out->delta_3 = r.delta_3;
  out->rmse = r.rmse;
  out->log_rmse = r.log_rmse;
  out->scale_inv_mse = r.scale_inv_mse;
  out->n_pixels = r.n_pixels;
}

dfnet::Image rgb_image(const uint8_t* rgb, int width, int height) {
  dfnet::Image img(width, height, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = rgb[i] / 255.0f;
  return img;
}

std::ostream* progress_stream(const dfnet::ExperimentConfig& cfg) { return cfg.quiet ? nullptr : &std::cerr; }

}  // namespace

extern "C" {

const char* df_last_error(void) { return g_last_error.c_str(); }

const char* df_version(void) { return "1.0.0"; }

df_config* df_config_create(void) { return new (std::nothrow) df_config(); }

void df_config_destroy(df_config* cfg) { delete cfg; }

df_status df_config_set(df_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require_ptr(cfg, "config");
    require_ptr(key, "key");
    require_ptr(value, "value");
    cfg->cfg.set(key, value);
  });
}

df_status df_config_load_file(df_config* cfg, const char* path) {
  return guarded([&] {
    require_ptr(cfg, "config");
    require_ptr(path, "path");
    cfg->cfg.load_file(path);
  });
}

size_t df_config_key_count(void) { return dfnet::ExperimentConfig::keys().size(); }

const char* df_config_key_name(size_t i) {
  const auto& keys = dfnet::ExperimentConfig::keys();
  return i < keys.size() ? keys[i].c_str() : nullptr;
}

df_status df_config_hash(const df_config* cfg, char out[17]) {
  return guarded([&] {
    require_ptr(cfg, "config");
    require_ptr(out, "out");
    const std::string h = cfg->cfg.config_hash();
    std::memcpy(out, h.c_str(), 17);
  });
}

df_status df_cmd_generate(const df_config* cfg, int* frames_written) {
  return guarded([&] {
    require_ptr(cfg, "config");
    const auto m = dfnet::cmd_generate(cfg->cfg);
    if (frames_written) *frames_written = int(m.frames.size());
  });
}

df_status df_cmd_flow(const df_config* cfg, int* flows_written) {
  return guarded([&] {
    require_ptr(cfg, "config");
    const int n = dfnet::cmd_flow(cfg->cfg);
    if (flows_written) *flows_written = n;
  });
}

df_status df_cmd_train(const df_config* cfg, df_train_summary* summary) {
  return guarded([&] {
    require_ptr(cfg, "config");
    const auto log = dfnet::cmd_train(cfg->cfg, progress_stream(cfg->cfg));
    if (summary) {
      summary->epochs = int(log.epochs.size());
      summary->steps = log.total_steps;
      summary->first_loss = log.epochs.empty() ? 0.0 : log.epochs.front().loss;
      summary->final_loss = log.epochs.empty() ? 0.0 : log.epochs.back().loss;
    }
  });
}

df_status df_cmd_eval(const df_config* cfg, df_metrics* report) {
  return guarded([&] {
    require_ptr(cfg, "config");
    const auto r = dfnet::cmd_eval(cfg->cfg);
    if (report) fill(report, r);
  });
}

df_status df_cmd_infer(const df_config* cfg) {
  return guarded([&] {
    require_ptr(cfg, "config");
    dfnet::cmd_infer(cfg->cfg);
  });
}

df_status df_cmd_perturb(const df_config* cfg) {
  return guarded([&] {
    require_ptr(cfg, "config");
    dfnet::cmd_perturb(cfg->cfg);
  });
}

df_status df_cmd_robustness(const df_config* cfg, df_metrics reports[4]) {
  return guarded([&] {
    require_ptr(cfg, "config");
    const auto table = dfnet::cmd_robustness(cfg->cfg, progress_stream(cfg->cfg));
    if (reports)
      for (std::size_t i = 0; i < 4 && i < table.reports.size(); ++i) fill(&reports[i], table.reports[i]);
  });
}

df_status df_model_load(const char* path, df_model** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = nullptr;
    *out = new df_model{dfnet::load_model(path)};
  });
}

void df_model_destroy(df_model* model) { delete model; }

int df_model_input_channels(const df_model* model) {
  return model ? model->model.net.spec().input_channels() : 0;
}

df_status df_model_predict(const df_model* model, const uint8_t* rgb, const uint8_t* prev_rgb, int width, int height,
                           double* depth) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(rgb, "rgb");
    require_ptr(depth, "depth");
    require_extents(width, height);
    const auto& net = model->model.net;
    const dfnet::Image curr = rgb_image(rgb, width, height);
    std::optional<dfnet::FlowField> flow;
    if (net.spec().variant == dfnet::InputVariant::ImagePlusFlow) {
      if (!prev_rgb) throw dfnet::UsageError("this model takes image+flow input; prev_rgb is required");
      const dfnet::Image prev = rgb_image(prev_rgb, width, height);
      flow = dfnet::estimate_flow(dfnet::to_grayscale(curr), dfnet::to_grayscale(prev));
    } else if (prev_rgb) {
      throw dfnet::UsageError("this model takes single-image input; prev_rgb must be NULL");
    }
    const auto d = dfnet::predict_depth(net, curr, flow ? &*flow : nullptr);
    std::copy(d.begin(), d.end(), depth);
  });
}

df_status df_flow_estimate(const float* prev, const float* curr, int width, int height, float* u, float* v) {
  return guarded([&] {
    require_ptr(prev, "prev");
    require_ptr(curr, "curr");
    require_ptr(u, "u");
    require_ptr(v, "v");
    require_extents(width, height);
    const std::size_t n = std::size_t(width) * height;
    dfnet::Image a(width, height, 1), b(width, height, 1);
    std::copy_n(prev, n, a.data.begin());
    std::copy_n(curr, n, b.data.begin());
    const auto f = dfnet::estimate_flow(a, b);
    std::copy(f.u.begin(), f.u.end(), u);
    std::copy(f.v.begin(), f.v.end(), v);
  });
}

df_status df_flo_write(const char* path, const float* u, const float* v, int width, int height) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(u, "u");
    require_ptr(v, "v");
    require_extents(width, height);
    dfnet::FlowField f(width, height);
    std::copy_n(u, f.pixel_count(), f.u.begin());
    std::copy_n(v, f.pixel_count(), f.v.begin());
    dfnet::write_flo(std::filesystem::path(path), f);
  });
}

df_status df_flo_read(const char* path, float* u, float* v, int* width, int* height) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(width, "width");
    require_ptr(height, "height");
    const auto f = dfnet::read_flo(std::filesystem::path(path));
    *width = f.width;
    *height = f.height;
    if (u) std::copy(f.u.begin(), f.u.end(), u);
    if (v) std::copy(f.v.begin(), f.v.end(), v);
  });
}

df_status df_metrics_compute(const double* pred, const double* gt, const uint8_t* mask, size_t n, double min_depth,
                             double max_range, df_metrics* out) {
  return guarded([&] {
    require_ptr(pred, "pred");
    require_ptr(gt, "gt");
    require_ptr(out, "out");
    if (!(min_depth >= 0) || !(max_range > min_depth)) throw dfnet::UsageError("invalid depth range");
    std::vector<std::uint8_t> m(n);
    for (size_t i = 0; i < n; ++i) m[i] = (!mask || mask[i]) && gt[i] > min_depth && gt[i] <= max_range;
    const dfnet::EvalConfig cfg{min_depth, max_range, dfnet::Roi::Full};
    const auto p = dfnet::clamp_prediction(std::span<const double>(pred, n), cfg);
    dfnet::MetricAccumulator acc;
    acc.add(p, std::span<const double>(gt, n), m);
    fill(out, acc.report());
  });
}

}  // extern "C"
