// Acceptance suite: one PASS/FAIL line per criterion.
//
//   dfnet_acceptance [--work DIR] [N ...]
//
// With no criterion numbers every criterion runs. Exit status is 0 only when
// every selected criterion passes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfnet/checkpoint.hpp"
#include "dfnet/conv.hpp"
#include "dfnet/dataset.hpp"
#include "dfnet/flow.hpp"
#include "dfnet/image.hpp"
#include "dfnet/metrics.hpp"
#include "dfnet/network.hpp"
#include "dfnet/perturb.hpp"
#include "dfnet/pipeline.hpp"
#include "dfnet/render.hpp"
#include "dfnet/scene.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dfnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path g_work;

// ---------------------------------------------------------------- 1

int floor_extent(int in, int k, int p, int s) {
  const int num = in + 2 * p - k;
  return (num >= 0 ? num / s : -((-num + s - 1) / s)) + 1;
}

Outcome shape_laws() {
  std::mt19937_64 rng(101);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int conv_ok = 0, deconv_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    ConvSpec s;
    s.kernel_h = pick(1, 5);
    s.kernel_w = pick(1, 5);
    s.stride = pick(1, 3);
    s.pad_h = pick(0, 2);
    s.pad_w = pick(0, 2);
    s.in_channels = pick(1, 3);
    s.out_channels = pick(1, 3);
    const int h = pick(s.kernel_h, 23), w = pick(s.kernel_w, 23);
    Tensor<float> x({1, std::size_t(s.in_channels), std::size_t(h), std::size_t(w)}, 1.0f);
    Tensor<float> wt({std::size_t(s.out_channels), std::size_t(s.in_channels), std::size_t(s.kernel_h),
                      std::size_t(s.kernel_w)},
                     0.1f);
    const auto y = conv2d_forward(x, wt, Tensor<float>({std::size_t(s.out_channels)}), s);
    conv_ok += y.dim(2) == std::size_t(floor_extent(h, s.kernel_h, s.pad_h, s.stride)) &&
               y.dim(3) == std::size_t(floor_extent(w, s.kernel_w, s.pad_w, s.stride));

    ConvSpec d = s;
    d.stride = 1 << pick(0, 2);
    d.pad_h = pick(0, 2);
    d.pad_w = pick(0, 2);
    d.kernel_h = d.stride + 2 * d.pad_h;
    d.kernel_w = d.stride + 2 * d.pad_w;
    const int dh = pick(1, 9), dw = pick(1, 9);
    Tensor<float> dx({1, std::size_t(d.in_channels), std::size_t(dh), std::size_t(dw)}, 1.0f);
    Tensor<float> dwt({std::size_t(d.in_channels), std::size_t(d.out_channels), std::size_t(d.kernel_h),
                       std::size_t(d.kernel_w)},
                      0.1f);
    const auto dy = deconv2d_forward(dx, dwt, Tensor<float>({std::size_t(d.out_channels)}), d);
    deconv_ok += dy.dim(2) == std::size_t(dh * d.stride) && dy.dim(3) == std::size_t(dw * d.stride);
  }

  NetworkSpec spec;
  spec.encoder_channels = {4, 4, 6, 6, 8};
  spec.decoder_channels = {6, 4, 1};
  int net_ok = 0, net_total = 0;
  for (auto v : {InputVariant::SingleImage, InputVariant::ImagePlusFlow}) {
    spec.variant = v;
    Network<float> net(spec, 9);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t h = 16 * std::size_t(pick(1, 8)), w = 16 * std::size_t(pick(1, 24));
      ForwardCache<float> cache;
      const auto out = net.forward(Tensor<float>({1, std::size_t(spec.input_channels()), h, w}, 0.1f), &cache);
      ++net_total;
      net_ok += out.log_depth.dim(2) == h && out.log_depth.dim(3) == w && cache.bottleneck().dim(2) * 16 == h &&
                cache.bottleneck().dim(3) * 16 == w;
    }
  }
  return {conv_ok == 200 && deconv_ok == 200 && net_ok == net_total,
          std::to_string(conv_ok) + "/200 conv, " + std::to_string(deconv_ok) + "/200 deconv, " +
              std::to_string(net_ok) + "/" + std::to_string(net_total) + " networks"};
}

// ---------------------------------------------------------------- 2

double op_fd_error(const std::function<Tensor<double>()>& f, const Tensor<double>& r,
                   std::vector<std::pair<Tensor<double>*, const Tensor<double>*>> checks) {
  auto loss = [&] { return oracle::dot(f(), r); };
  double worst = 0;
  for (auto& [value, grad] : checks)
    for (std::size_t i = 0; i < value->size(); ++i)
      worst = std::max(worst, oracle::rel_error((*grad)[i], oracle::central_difference(loss, (*value)[i])));
  return worst;
}

Outcome gradients() {
  std::mt19937_64 rng(202);
  double worst_op = 0;
  for (int stride : {1, 2}) {
    ConvSpec s{3, 3, stride, 1, 1, 2, 3};
    auto x = oracle::random_tensor({2, 2, 5, 6}, rng);
    auto w = oracle::random_tensor({3, 2, 3, 3}, rng);
    auto b = oracle::random_tensor({3}, rng);
    const auto r = oracle::random_tensor(conv2d_forward(x, w, b, s).shape(), rng);
    const auto g = conv2d_backward(r, x, w, s);
    worst_op = std::max(worst_op, op_fd_error([&] { return conv2d_forward(x, w, b, s); }, r,
                                              {{&x, &g.input}, {&w, &g.weights}, {&b, &g.bias}}));
  }
  for (int stride : {2, 4}) {
    ConvSpec s{2 * stride, 2 * stride, stride, stride / 2, stride / 2, 2, 3};
    auto x = oracle::random_tensor({2, 2, 3, 2}, rng);
    auto w = oracle::random_tensor({2, 3, 2 * std::size_t(stride), 2 * std::size_t(stride)}, rng);
    auto b = oracle::random_tensor({3}, rng);
    const auto r = oracle::random_tensor(deconv2d_forward(x, w, b, s).shape(), rng);
    const auto g = deconv2d_backward(r, x, w, s);
    worst_op = std::max(worst_op, op_fd_error([&] { return deconv2d_forward(x, w, b, s); }, r,
                                              {{&x, &g.input}, {&w, &g.weights}, {&b, &g.bias}}));
  }
  {
    auto z = oracle::random_tensor({256}, rng);
    for (std::size_t i = 0; i < z.size(); ++i)
      if (std::abs(z[i]) <= 1e-3) z[i] = 0.5;
    const auto r = oracle::random_tensor({256}, rng);
    const auto g = relu_backward(r, z);
    worst_op = std::max(worst_op, op_fd_error([&] { return relu(z); }, r, {{&z, &g}}));
  }
  for (auto kind : {LossKind::LogRmse, LossKind::LinearRmse}) {
    std::uniform_real_distribution<double> depth(0.5, 40.0), noise(-0.5, 0.5);
    std::vector<double> x, gt;
    std::vector<std::uint8_t> mask;
    for (int i = 0; i < 60; ++i) {
      gt.push_back(depth(rng));
      x.push_back(std::log(gt.back()) + noise(rng));
      mask.push_back(i % 7 != 3);
    }
    const auto base = compute_loss(kind, x, gt, mask);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double num = oracle::central_difference([&] { return compute_loss(kind, x, gt, mask).value; }, x[i]);
      worst_op = std::max(worst_op, oracle::rel_error(base.grad[i], num));
    }
  }

  double worst_net = 0;
  for (auto v : {InputVariant::SingleImage, InputVariant::ImagePlusFlow})
    for (auto loss : {LossKind::LogRmse, LossKind::LinearRmse})
      worst_net = std::max(worst_net, oracle::network_gradcheck(v, loss, 31).max_rel_error);
  return {worst_op < 1e-6 && worst_net < 1e-6,
          "ops " + fmt("%.2e", worst_op) + " (per entry), network " + fmt("%.2e", worst_net) + " (norm-wise)"};
}

// ---------------------------------------------------------------- 3

Outcome adjoint() {
  std::mt19937_64 rng(303);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int stride = 1 << pick(0, 2), ph = pick(0, 2), pw = pick(0, 2);
    const int ci = pick(1, 4), co = pick(1, 4), n = pick(1, 2);
    const std::size_t hs = pick(1, 5), ws = pick(1, 5);
    ConvSpec conv{stride + 2 * ph, stride + 2 * pw, stride, ph, pw, ci, co};
    ConvSpec deconv{conv.kernel_h, conv.kernel_w, stride, ph, pw, co, ci};
    const auto w = oracle::random_tensor(
        {std::size_t(co), std::size_t(ci), std::size_t(conv.kernel_h), std::size_t(conv.kernel_w)}, rng);
    const auto x = oracle::random_tensor({std::size_t(n), std::size_t(ci), hs * stride, ws * stride}, rng);
    const auto y = oracle::random_tensor({std::size_t(n), std::size_t(co), hs, ws}, rng);
    const double lhs = oracle::dot(conv2d_forward(x, w, Tensor<double>({std::size_t(co)}), conv), y);
    const double rhs = oracle::dot(x, deconv2d_forward(y, w, Tensor<double>({std::size_t(ci)}), deconv));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return {worst < 1e-10, "max |<Cx,y> - <x,C^T y>| " + fmt("%.2e", worst) + " over 50 cases"};
}

// ---------------------------------------------------------------- 4

Outcome metric_oracles() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> depth(0.5, 40.0), ratio(-0.7, 0.7), coin(0, 1), scale(0.1, 10.0);
  double worst = 0, worst_scale = 0;
  int monotone = 0;
  const double thr[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 40 + trial * 3;
    std::vector<double> y, g;
    std::vector<std::uint8_t> m;
    for (std::size_t i = 0; i < n; ++i) {
      g.push_back(depth(rng));
      y.push_back(g.back() * std::exp(ratio(rng)));
      m.push_back(i == 0 || coin(rng) < 0.8);
    }
    double cnt = 0, hit[3] = {0, 0, 0}, sq = 0, lsq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!m[i]) continue;
      cnt += 1;
      const double r = std::max(y[i] / g[i], g[i] / y[i]);
      for (int k = 0; k < 3; ++k) hit[k] += r < thr[k];
      sq += (y[i] - g[i]) * (y[i] - g[i]);
      lsq += (std::log(y[i]) - std::log(g[i])) * (std::log(y[i]) - std::log(g[i]));
    }
    MetricAccumulator acc;
    acc.add(y, g, m);
    const MetricsReport r = acc.report();
    const double got[6] = {r.delta_1, r.delta_2, r.delta_3, r.rmse, r.log_rmse, r.scale_inv_mse};
    const double want[6] = {hit[0] / cnt, hit[1] / cnt, hit[2] / cnt, std::sqrt(sq / cnt), std::sqrt(lsq / cnt),
                            oracle::variance_of_log_ratio(y, g, m)};
    for (int k = 0; k < 6; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    worst = std::max(worst, std::abs(metric_scale_inv_log_mse(y, g, m) - want[5]));

    const double c = scale(rng);
    std::vector<double> cy;
    for (double v : y) cy.push_back(c * v);
    worst_scale = std::max(worst_scale, std::abs(metric_scale_inv_log_mse(cy, g, m) - metric_scale_inv_log_mse(y, g, m)));
    monotone += r.delta_1 <= r.delta_2 && r.delta_2 <= r.delta_3;
  }
  return {worst < 1e-12 && worst_scale < 1e-12 && monotone == 100,
          "oracle diff " + fmt("%.2e", worst) + ", scale diff " + fmt("%.2e", worst_scale) + ", monotone " +
              std::to_string(monotone) + "/100"};
}

// ---------------------------------------------------------------- 5

Outcome overfit() {
  DatasetConfig dc;
  dc.seed = 11;
  dc.frames = 8;
  dc.sequence_length = 8;
  dc.width = 32;
  dc.height = 32;
  const fs::path dir = g_work / "overfit";
  fs::remove_all(dir);
  const SequenceManifest m = generate_dataset(dc, dir);
  write_dataset_flows(dir, m);
  NetworkSpec spec;
  spec.variant = InputVariant::ImagePlusFlow;
  spec.encoder_channels = {128, 256, 512, 1024, 1024};
  spec.decoder_channels = {512, 256, 1};
  spec.input_mean = m.channel_means;
  EvalConfig ev;
  ev.max_range = m.max_range;
  const TrainingSet set = load_training_set(dir, m, spec, ev);
  Network<float> net(spec, 5);
  TrainSettings s;
  s.lr = 1e-3;
  s.lr_decay = 1.0;
  s.momentum = 0.99;
  s.batch_size = 1;
  s.epochs = 1000;
  s.max_steps = 500;
  s.seed = 1;
  const TrainingLog log = train_network(net, set, s);
  const double final_loss = dataset_loss(net, set, LossKind::LogRmse);
  return {final_loss < 0.05 && log.total_steps == 500,
          "training log RMSE " + fmt("%.4f", final_loss) + " after " + std::to_string(log.total_steps) + " steps"};
}

// ---------------------------------------------------------------- 6, 7, 8

// Desk-scale comparison protocol shared by criteria 6-8.
struct Protocol {
  int width = 128;
  int height = 64;
  int train_frames = 500;
  int eval_frames = 100;
  std::vector<int> encoder{16, 32, 64, 128, 128};
  std::vector<int> decoder{64, 32, 1};
  int epochs = 20;
  int batch_size = 4;
  double lr = 1e-3;
  double momentum = 0.99;
};

struct SeedResult {
  MetricsReport flow_log, image_log, flow_linear;
  fs::path eval_dir;
  SequenceManifest eval_manifest;
  std::unique_ptr<Network<float>> flow_log_net;
};

std::vector<SeedResult> g_comparisons;

SequenceManifest dataset_with_flow(const fs::path& dir, std::uint64_t seed, int frames, const Protocol& p) {
  if (fs::exists(dir / "flow") && fs::exists(dir / "manifest.txt")) {
    const SequenceManifest m = read_manifest(dir / "manifest.txt");
    if (m.seed == seed && int(m.frames.size()) == frames && m.intrinsics.width == p.width) return m;
  }
  fs::remove_all(dir);
  DatasetConfig dc;
  dc.seed = seed;
  dc.frames = frames;
  dc.width = p.width;
  dc.height = p.height;
  const SequenceManifest m = generate_dataset(dc, dir);
  write_dataset_flows(dir, m);
  return m;
}

void run_comparisons() {
  if (!g_comparisons.empty()) return;
  const Protocol p;
  for (std::uint64_t seed : {1, 2, 3}) {
    const fs::path train_dir = g_work / ("compare_train_" + std::to_string(seed));
    const fs::path eval_dir = g_work / ("compare_eval_" + std::to_string(seed));
    const SequenceManifest mt = dataset_with_flow(train_dir, seed, p.train_frames, p);
    const SequenceManifest me = dataset_with_flow(eval_dir, seed + 1000, p.eval_frames, p);
    SeedResult res;
    res.eval_dir = eval_dir;
    res.eval_manifest = me;
    EvalConfig ev;
    ev.max_range = mt.max_range;
    auto train_one = [&](InputVariant v, LossKind loss, MetricsReport& out) {
      NetworkSpec spec;
      spec.variant = v;
      spec.encoder_channels = p.encoder;
      spec.decoder_channels = p.decoder;
      spec.input_mean = mt.channel_means;
      const TrainingSet set = load_training_set(train_dir, mt, spec, ev);
      auto net = std::make_unique<Network<float>>(spec, seed);
      TrainSettings s;
      s.loss = loss;
      s.lr = p.lr;
      s.momentum = p.momentum;
      s.batch_size = p.batch_size;
      s.epochs = p.epochs;
      s.seed = seed;
      train_network(*net, set, s);
      out = evaluate_network(*net, eval_dir, me, ev);
      return net;
    };
    res.flow_log_net = train_one(InputVariant::ImagePlusFlow, LossKind::LogRmse, res.flow_log);
    train_one(InputVariant::SingleImage, LossKind::LogRmse, res.image_log);
    train_one(InputVariant::ImagePlusFlow, LossKind::LinearRmse, res.flow_linear);
    std::cout << "  seed " << seed << ": log_rmse flow " << fmt("%.4f", res.flow_log.log_rmse) << " image "
              << fmt("%.4f", res.image_log.log_rmse) << "; delta_1 log " << fmt("%.4f", res.flow_log.delta_1)
              << " linear " << fmt("%.4f", res.flow_linear.delta_1) << "\n"
              << std::flush;
    g_comparisons.push_back(std::move(res));
  }
}

Outcome variant_direction() {
  run_comparisons();
  int wins = 0;
  std::string detail = "flow <= image log RMSE in ";
  for (const auto& r : g_comparisons) wins += r.flow_log.log_rmse <= r.image_log.log_rmse;
  return {wins >= 2, detail + std::to_string(wins) + "/3 seeds"};
}

Outcome loss_direction() {
  run_comparisons();
  int wins = 0;
  for (const auto& r : g_comparisons) wins += r.flow_log.delta_1 > r.flow_linear.delta_1;
  return {wins >= 2, "log beats linear on delta_1 in " + std::to_string(wins) + "/3 seeds"};
}

Outcome robustness_direction() {
  run_comparisons();
  const SeedResult& r = g_comparisons.front();
  EvalConfig ev;
  ev.max_range = r.eval_manifest.max_range;
  const fs::path blur_dir = g_work / "robust_blur10", dark_dir = g_work / "robust_dark";
  fs::remove_all(blur_dir);
  fs::remove_all(dark_dir);
  const auto mb = perturb_dataset(r.eval_dir, PerturbSpec::blur(10.0), blur_dir, FlowParams{});
  const auto md = perturb_dataset(r.eval_dir, PerturbSpec::darken(0.4, 1.5), dark_dir, FlowParams{});
  const MetricsReport plain = evaluate_network(*r.flow_log_net, r.eval_dir, r.eval_manifest, ev);
  const MetricsReport blur = evaluate_network(*r.flow_log_net, blur_dir, mb, ev);
  const MetricsReport dark = evaluate_network(*r.flow_log_net, dark_dir, md, ev);
  return {blur.delta_1 < plain.delta_1 && dark.delta_1 < plain.delta_1,
          "delta_1 plain " + fmt("%.4f", plain.delta_1) + ", blur10 " + fmt("%.4f", blur.delta_1) + ", darkened " +
              fmt("%.4f", dark.delta_1)};
}

// ---------------------------------------------------------------- 9

Outcome round_trips() {
  std::mt19937_64 rng(909);
  std::normal_distribution<float> n(0.0f, 5.0f);
  bool flo_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    FlowField f(3 + trial * 7, 2 + trial * 3);
    for (auto& u : f.u) u = n(rng);
    for (auto& v : f.v) v = n(rng);
    const fs::path p = g_work / "rt.flo";
    write_flo(p, f);
    const FlowField g = read_flo(p);
    flo_ok = flo_ok && g.width == f.width && g.height == f.height &&
             std::memcmp(g.u.data(), f.u.data(), f.u.size() * sizeof(float)) == 0 &&
             std::memcmp(g.v.data(), f.v.data(), f.v.size() * sizeof(float)) == 0;
  }

  NetworkSpec spec;
  spec.encoder_channels = {8, 8, 16, 16, 16};
  spec.decoder_channels = {8, 8, 1};
  spec.input_mean = {0.4, 0.45, 0.5};
  Network<float> net(spec, 77);
  const fs::path ck = g_work / "rt.ckpt";
  save_checkpoint(ck, spec.to_descriptor() + "; seed=77", net.params());
  const LoadedModel loaded = load_model(ck);
  Tensor<float> x({2, 5, 48, 80});
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
  const auto a = net.forward(x).log_depth;
  const auto b = loaded.net.forward(x).log_depth;
  const bool ck_ok = std::memcmp(a.raw(), b.raw(), a.size() * sizeof(float)) == 0;

  const double max_range = 40.0, scale = full_range_scale(max_range);
  DepthMap d(97, 41, DepthConvention::Spherical, max_range);
  std::uniform_real_distribution<double> dd(0.01, max_range);
  for (std::size_t i = 0; i < d.pixel_count(); ++i) {
    d.values[i] = dd(rng);
    d.valid[i] = 1;
  }
  const fs::path png = g_work / "rt_depth.png";
  write_png16(png, encode_depth(d, scale));
  const DepthMap back = decode_depth(read_png16(png), scale, max_range);
  double worst = 0;
  for (std::size_t i = 0; i < d.pixel_count(); ++i) worst = std::max(worst, std::abs(back.values[i] - d.values[i]));
  const bool png_ok = worst <= scale / 2;
  return {flo_ok && ck_ok && png_ok, std::string(".flo ") + (flo_ok ? "bit-exact" : "MISMATCH") + ", checkpoint " +
                                         (ck_ok ? "bit-identical" : "MISMATCH") + ", depth PNG max err " +
                                         fmt("%.3g", worst / scale) + " levels"};
}

// ---------------------------------------------------------------- 10

Image textured(int w, int h, int shift) {
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = ((x - shift) % w + w) % w;
      img.at(x, y) = float(0.5 + 0.2 * std::sin(2 * M_PI * sx / 16.0) * std::cos(2 * M_PI * y / 21.0) +
                           0.15 * std::sin(2 * M_PI * (sx + 2 * y) / 32.0) + 0.1 * std::cos(2 * M_PI * sx / 9.0));
    }
  return img;
}

Outcome flow_sanity() {
  const Image a = textured(64, 64, 0);
  const double still = estimate_flow(a, a).mean_magnitude();
  const FlowField f = estimate_flow(a, textured(64, 64, 3));
  double epe = 0;
  for (std::size_t i = 0; i < f.pixel_count(); ++i) epe += std::hypot(f.u[i] - 3.0, f.v[i]);
  epe /= double(f.pixel_count());
  return {still < 0.05 && epe < 0.5, "identical " + fmt("%.4f", still) + " px, 3 px shift EPE " + fmt("%.4f", epe) + " px"};
}

// ---------------------------------------------------------------- 11

Outcome renderer_oracles() {
  const Intrinsics k{60.0, 40.0, 30.0, 81, 61};
  double worst = 0;
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    Scene s;
    s.has_ground = false;
    Primitive ball;
    ball.kind = PrimitiveKind::Sphere;
    ball.center = {10.0 + 3 * trial, 2 * u(rng), u(rng)};
    ball.size = {3.0, 3.0, 3.0};
    s.primitives.push_back(ball);
    const auto r = render(s, CameraPose{}, k, RenderOptions{100.0});
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const std::size_t i = std::size_t(y) * k.width + x;
        const auto t = oracle::ray_sphere({0, 0, 0}, pixel_ray(CameraPose{}, k, x, y), ball.center, 3.0);
        if (bool(r.depth.valid[i]) != t.has_value()) return {false, "sphere coverage differs at pixel " + std::to_string(i)};
        if (t) worst = std::max(worst, std::abs(r.depth.values[i] - *t));
      }

    Scene ground;
    CameraPose pose;
    pose.position = {u(rng), u(rng), 1.5 + u(rng)};
    pose.pitch = 0.2 + 0.1 * u(rng);
    pose.roll = 0.3 * u(rng);
    pose.yaw = u(rng);
    const auto g = render(ground, pose, k, RenderOptions{200.0});
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const std::size_t i = std::size_t(y) * k.width + x;
        const auto t = oracle::ray_ground(pose.position, pixel_ray(pose, k, x, y));
        const bool in_range = t && *t <= 200.0;
        if (bool(g.depth.valid[i]) != in_range) return {false, "ground coverage differs at pixel " + std::to_string(i)};
        if (in_range) worst = std::max(worst, std::abs(g.depth.values[i] - *t));
      }
  }

  std::uniform_real_distribution<double> dd(0.6, 39.0);
  DepthMap sph(k.width, k.height, DepthConvention::Spherical, 40.0);
  for (std::size_t i = 0; i < sph.pixel_count(); ++i) {
    sph.values[i] = dd(rng);
    sph.valid[i] = 1;
  }
  const DepthMap pl = spherical_to_planar(sph, k);
  const DepthMap back = planar_to_spherical(pl, k);
  bool ordered = true;
  double round_trip = 0;
  for (std::size_t i = 0; i < sph.pixel_count(); ++i) {
    ordered = ordered && sph.values[i] >= pl.values[i];
    round_trip = std::max(round_trip, std::abs(back.values[i] - sph.values[i]));
  }
  return {worst < 1e-9 && ordered && round_trip < 1e-12,
          "ray depth err " + fmt("%.2e", worst) + ", spherical >= planar " + (ordered ? "yes" : "NO") +
              ", round trip " + fmt("%.2e", round_trip)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "shape laws", shape_laws},
    {2, "gradients vs finite differences", gradients},
    {3, "conv/deconv adjoint identity", adjoint},
    {4, "metric oracles", metric_oracles},
    {5, "overfit 8-frame fixture", overfit},
    {6, "image+flow beats single image", variant_direction},
    {7, "log loss beats linear loss", loss_direction},
    {8, "blur and darkening reduce delta_1", robustness_direction},
    {9, "format round trips", round_trips},
    {10, "flow sanity", flow_sanity},
    {11, "renderer oracles", renderer_oracles},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  g_work = fs::temp_directory_path() / "dfnet_acceptance";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--work") == 0 && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      selected.insert(std::atoi(argv[i]));
    }
  }
  fs::create_directories(g_work);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
