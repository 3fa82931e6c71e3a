#include "dfnet/network.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dfnet/error.hpp"
#include "dfnet/flow.hpp"

namespace dfnet {
namespace {

constexpr const char* kDescriptorHeader = "dfnet-arch v1";
const std::vector<int> kFixedStrides{2, 2, 2, 1, 2};
const std::vector<int> kFixedUpsamples{2, 2, 4};

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad integer '" + s + "' in descriptor");
  return v;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_int(item));
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DataError("bad number '" + s + "' in descriptor");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("bad number '" + s + "' in descriptor");
  }
}

std::string layer_name(const char* prefix, int layer, const char* suffix) {
  return std::string(prefix) + std::to_string(layer + 1) + "." + suffix;
}

template <typename T>
void accumulate_grad(Tensor<T>& param, const Tensor<T>& grad) {
  param.ensure_grad();
  auto g = param.grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad[i];
}

}  // namespace

std::string to_string(InputVariant v) {
  return v == InputVariant::ImagePlusFlow ? "image_plus_flow" : "single_image";
}

InputVariant parse_input_variant(const std::string& s) {
  if (s == "image_plus_flow" || s == "flow") return InputVariant::ImagePlusFlow;
  if (s == "single_image" || s == "image") return InputVariant::SingleImage;
  throw UsageError("unknown input variant '" + s + "' (expected single_image or image_plus_flow)");
}

void NetworkSpec::validate() const {
  if (encoder_channels.size() != 5) throw UsageError("encoder must have exactly 5 layers");
  if (encoder_strides != kFixedStrides) throw UsageError("encoder strides must be 2,2,2,1,2");
  if (kernel != 3) throw UsageError("encoder kernels must be 3x3");
  if (decoder_channels.size() != 3) throw UsageError("decoder must have exactly 3 layers");
  if (decoder_upsamples != kFixedUpsamples) throw UsageError("decoder upsample factors must be 2,2,4");
  if (decoder_channels.back() != 1) throw UsageError("decoder head must have exactly 1 output channel");
  for (int c : encoder_channels)
    if (c < 1) throw UsageError("channel counts must be >= 1");
  for (int c : decoder_channels)
    if (c < 1) throw UsageError("channel counts must be >= 1");
  if (output_mode != "log_depth") throw UsageError("only the log_depth output mode is supported");
  for (double m : input_mean)
    if (!std::isfinite(m)) throw UsageError("input means must be finite");
}

std::string NetworkSpec::to_descriptor() const {
  std::string s = kDescriptorHeader;
  s += "; variant=" + to_string(variant);
  s += "; in=" + std::to_string(input_channels());
  s += "; enc=" + join_ints(encoder_channels);
  s += "; strides=" + join_ints(encoder_strides);
  s += "; kernel=" + std::to_string(kernel);
  s += "; dec=" + join_ints(decoder_channels);
  s += "; up=" + join_ints(decoder_upsamples);
  s += "; output=" + output_mode;
  s += "; mean=" + format_double(input_mean[0]) + "," + format_double(input_mean[1]) + "," +
       format_double(input_mean[2]);
  return s;
}

NetworkSpec parse_descriptor(const std::string& descriptor, std::map<std::string, std::string>* extra) {
  const auto parts = split(descriptor, ';');
  if (parts.empty() || parts[0] != kDescriptorHeader) {
    throw DataError("architecture descriptor must start with '" + std::string(kDescriptorHeader) + "'");
  }
  NetworkSpec spec;
  int declared_inputs = -1;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].empty()) continue;
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw DataError("malformed descriptor entry '" + parts[i] + "'");
    const std::string key = trim(parts[i].substr(0, eq));
    const std::string value = trim(parts[i].substr(eq + 1));
    if (key == "variant") {
      try {
        spec.variant = parse_input_variant(value);
      } catch (const UsageError& e) {
        throw DataError(e.what());
      }
    } else if (key == "in") {
      declared_inputs = parse_int(value);
    } else if (key == "enc") {
      spec.encoder_channels = parse_int_list(value);
    } else if (key == "strides") {
      spec.encoder_strides = parse_int_list(value);
    } else if (key == "kernel") {
      spec.kernel = parse_int(value);
    } else if (key == "dec") {
      spec.decoder_channels = parse_int_list(value);
    } else if (key == "up") {
      spec.decoder_upsamples = parse_int_list(value);
    } else if (key == "output") {
      spec.output_mode = value;
    } else if (key == "mean") {
      const auto items = split(value, ',');
      if (items.size() != 3) throw DataError("descriptor mean must have 3 entries");
      for (int c = 0; c < 3; ++c) spec.input_mean[c] = parse_double(items[c]);
    } else if (extra) {
      (*extra)[key] = value;
    }
  }
  if (declared_inputs != -1 && declared_inputs != spec.input_channels()) {
    throw DataError("descriptor input channel count disagrees with its variant");
  }
  try {
    spec.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid architecture descriptor: ") + e.what());
  }
  return spec;
}

ConvSpec encoder_layer_spec(const NetworkSpec& spec, int layer) {
  ConvSpec c;
  c.kernel_h = c.kernel_w = spec.kernel;
  c.stride = spec.encoder_strides.at(layer);
  c.pad_h = c.pad_w = spec.kernel / 2;
  c.in_channels = layer == 0 ? spec.input_channels() : spec.encoder_channels.at(layer - 1);
  c.out_channels = spec.encoder_channels.at(layer);
  return c;
}

// Upsampling by s uses a 2s kernel with s/2 padding: output is exactly s times the input.
ConvSpec decoder_layer_spec(const NetworkSpec& spec, int layer) {
  ConvSpec c;
  const int s = spec.decoder_upsamples.at(layer);
  c.kernel_h = c.kernel_w = 2 * s;
  c.stride = s;
  c.pad_h = c.pad_w = s / 2;
  c.in_channels = layer == 0 ? spec.encoder_channels.back() : spec.decoder_channels.at(layer - 1);
  c.out_channels = spec.decoder_channels.at(layer);
  return c;
}

std::size_t expected_parameter_count(const NetworkSpec& spec) {
  spec.validate();
  std::size_t n = 0;
  for (int l = 0; l < 5; ++l) {
    const ConvSpec c = encoder_layer_spec(spec, l);
    n += std::size_t(c.out_channels) * c.in_channels * c.kernel_h * c.kernel_w + c.out_channels;
  }
  for (int l = 0; l < 3; ++l) {
    const ConvSpec c = decoder_layer_spec(spec, l);
    n += std::size_t(c.in_channels) * c.out_channels * c.kernel_h * c.kernel_w + c.out_channels;
  }
  return n;
}

template <typename T>
Tensor<T> PredictionBatch<T>::metric_depth() const {
  Tensor<T> out(log_depth.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_depth[i]);
  return out;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), params_(seed) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  for (int l = 0; l < 5; ++l) {
    const ConvSpec c = encoder_layer_spec(spec_, l);
    Tensor<T> w(Shape{std::size_t(c.out_channels), std::size_t(c.in_channels), std::size_t(c.kernel_h),
                      std::size_t(c.kernel_w)});
    init_fan_in_uniform(w, double(c.in_channels) * c.kernel_h * c.kernel_w, rng);
    params_.add(layer_name("enc", l, "weight"), std::move(w));
    params_.add(layer_name("enc", l, "bias"), Tensor<T>(Shape{std::size_t(c.out_channels)}));
  }
  for (int l = 0; l < 3; ++l) {
    const ConvSpec c = decoder_layer_spec(spec_, l);
    Tensor<T> w(Shape{std::size_t(c.in_channels), std::size_t(c.out_channels), std::size_t(c.kernel_h),
                      std::size_t(c.kernel_w)});
    // Each output pixel of a stride-s transposed convolution sees (k/s)^2 taps per input channel.
    const double taps = double(c.kernel_h / c.stride) * double(c.kernel_w / c.stride);
    init_fan_in_uniform(w, double(c.in_channels) * taps, rng);
    params_.add(layer_name("dec", l, "weight"), std::move(w));
    params_.add(layer_name("dec", l, "bias"), Tensor<T>(Shape{std::size_t(c.out_channels)}));
  }
}

template <typename T>
Network<T>::Network(NetworkSpec spec, ParamStore<T> params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  check_params();
}

template <typename T>
void Network<T>::check_params() const {
  if (params_.size() != 16) {
    throw DataError("expected 16 parameter tensors, found " + std::to_string(params_.size()));
  }
  for (int l = 0; l < 5; ++l) {
    const ConvSpec c = encoder_layer_spec(spec_, l);
    const Shape ws{std::size_t(c.out_channels), std::size_t(c.in_channels), std::size_t(c.kernel_h),
                   std::size_t(c.kernel_w)};
    if (!params_.contains(layer_name("enc", l, "weight")) || params_.get(layer_name("enc", l, "weight")).shape() != ws ||
        !params_.contains(layer_name("enc", l, "bias")) ||
        params_.get(layer_name("enc", l, "bias")).shape() != Shape{std::size_t(c.out_channels)}) {
      throw DataError("parameters for encoder layer " + std::to_string(l + 1) + " do not match the spec");
    }
  }
  for (int l = 0; l < 3; ++l) {
    const ConvSpec c = decoder_layer_spec(spec_, l);
    const Shape ws{std::size_t(c.in_channels), std::size_t(c.out_channels), std::size_t(c.kernel_h),
                   std::size_t(c.kernel_w)};
    if (!params_.contains(layer_name("dec", l, "weight")) || params_.get(layer_name("dec", l, "weight")).shape() != ws ||
        !params_.contains(layer_name("dec", l, "bias")) ||
        params_.get(layer_name("dec", l, "bias")).shape() != Shape{std::size_t(c.out_channels)}) {
      throw DataError("parameters for decoder layer " + std::to_string(l + 1) + " do not match the spec");
    }
  }
}

template <typename T>
PredictionBatch<T> Network<T>::forward(const Tensor<T>& input, ForwardCache<T>* cache) const {
  if (input.rank() != 4) throw UsageError("network input must be [n,c,H,W]");
  if (int(input.dim(1)) != spec_.input_channels()) {
    throw UsageError("network expects " + std::to_string(spec_.input_channels()) + " input channels (" +
                     to_string(spec_.variant) + "), got " + std::to_string(input.dim(1)));
  }
  if (input.dim(2) % 16 != 0 || input.dim(3) % 16 != 0 || input.dim(2) == 0 || input.dim(3) == 0) {
    throw UsageError("network input extents " + std::to_string(input.dim(2)) + "x" + std::to_string(input.dim(3)) +
                     " are not multiples of 16; pad the input first");
  }
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  Tensor<T> x = input;
  for (int l = 0; l < 5; ++l) {
    Tensor<T> z = conv2d_forward(x, params_.get(layer_name("enc", l, "weight")),
                                 params_.get(layer_name("enc", l, "bias")), encoder_layer_spec(spec_, l));
    Tensor<T> a = relu(z);
    if (cache) {
      cache->layer_inputs.push_back(std::move(x));
      cache->pre_activations.push_back(std::move(z));
    }
    x = std::move(a);
  }
  for (int l = 0; l < 3; ++l) {
    Tensor<T> z = deconv2d_forward(x, params_.get(layer_name("dec", l, "weight")),
                                   params_.get(layer_name("dec", l, "bias")), decoder_layer_spec(spec_, l));
    const bool head = l == 2;
    Tensor<T> a = head ? Tensor<T>() : relu(z);
    if (cache) {
      cache->layer_inputs.push_back(std::move(x));
      cache->pre_activations.push_back(head ? Tensor<T>() : z);
    }
    x = head ? std::move(z) : std::move(a);
  }
  return PredictionBatch<T>{std::move(x)};
}

template <typename T>
Tensor<T> Network<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& log_depth_grad) {
  if (cache.layer_inputs.size() != 8) throw UsageError("backward requires a cache from forward()");
  Tensor<T> g = log_depth_grad;
  for (int l = 2; l >= 0; --l) {
    const std::size_t idx = 5 + l;
    if (l != 2) g = relu_backward(g, cache.pre_activations[idx]);
    auto& w = params_.get(layer_name("dec", l, "weight"));
    ConvGrads<T> grads = deconv2d_backward(g, cache.layer_inputs[idx], w, decoder_layer_spec(spec_, l));
    accumulate_grad(w, grads.weights);
    accumulate_grad(params_.get(layer_name("dec", l, "bias")), grads.bias);
    g = std::move(grads.input);
  }
  for (int l = 4; l >= 0; --l) {
    g = relu_backward(g, cache.pre_activations[l]);
    auto& w = params_.get(layer_name("enc", l, "weight"));
    ConvGrads<T> grads = conv2d_backward(g, cache.layer_inputs[l], w, encoder_layer_spec(spec_, l));
    accumulate_grad(w, grads.weights);
    accumulate_grad(params_.get(layer_name("enc", l, "bias")), grads.bias);
    g = std::move(grads.input);
  }
  return g;
}

std::size_t round_up_to_16(std::size_t extent) { return (extent + 15) / 16 * 16; }

template <typename T>
Tensor<T> pad_to_16(const Tensor<T>& image, CropRecord* record) {
  if (image.rank() < 2) throw UsageError("pad_to_16 needs at least two spatial axes");
  const std::size_t r = image.rank();
  const std::size_t h = image.dim(r - 2), w = image.dim(r - 1);
  const std::size_t ph = round_up_to_16(h), pw = round_up_to_16(w);
  if (record) *record = CropRecord{h, w, ph - h, pw - w};
  if (ph == h && pw == w) return image;
  Shape shape = image.shape();
  shape[r - 2] = ph;
  shape[r - 1] = pw;
  Tensor<T> out(shape);
  const std::size_t planes = image.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = image.raw() + (p * h + y) * w;
      std::copy(src, src + w, out.raw() + (p * ph + y) * pw);
    }
  }
  return out;
}

template <typename T>
Tensor<T> crop_padding(const Tensor<T>& padded, const CropRecord& record) {
  const std::size_t r = padded.rank();
  if (r < 2) throw UsageError("crop_padding needs at least two spatial axes");
  const std::size_t ph = padded.dim(r - 2), pw = padded.dim(r - 1);
  if (ph != record.height + record.pad_bottom || pw != record.width + record.pad_right) {
    throw UsageError("crop record does not match tensor extents");
  }
  if (record.empty()) return padded;
  Shape shape = padded.shape();
  shape[r - 2] = record.height;
  shape[r - 1] = record.width;
  Tensor<T> out(shape);
  const std::size_t planes = padded.size() / (ph * pw);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < record.height; ++y) {
      const T* src = padded.raw() + (p * ph + y) * pw;
      std::copy(src, src + record.width, out.raw() + (p * record.height + y) * record.width);
    }
  }
  return out;
}

template <typename T>
Tensor<T> assemble_input(const Tensor<T>& images, std::span<const FlowField* const> flows, const NetworkSpec& spec) {
  if (images.rank() != 4 || images.dim(1) != 3) throw UsageError("images must be [n,3,H,W]");
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  const bool with_flow = spec.variant == InputVariant::ImagePlusFlow;
  if (with_flow && flows.size() != n) {
    throw UsageError("image_plus_flow input needs one flow field per image (got " + std::to_string(flows.size()) +
                     " for " + std::to_string(n) + " images)");
  }
  if (!with_flow && !flows.empty()) throw UsageError("single_image input does not take flow");
  const std::size_t channels = with_flow ? 5 : 3;
  const std::size_t plane = h * w;
  Tensor<T> out(Shape{n, channels, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      const T* src = images.raw() + (b * 3 + c) * plane;
      T* dst = out.raw() + (b * channels + c) * plane;
      const T mean = static_cast<T>(spec.input_mean[c]);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] - mean;
    }
    if (!with_flow) continue;
    const FlowField* f = flows[b];
    if (!f) throw UsageError("missing flow field for image " + std::to_string(b));
    if (std::size_t(f->width) != w || std::size_t(f->height) != h) {
      throw UsageError("flow extents " + std::to_string(f->width) + "x" + std::to_string(f->height) +
                       " do not match image " + std::to_string(w) + "x" + std::to_string(h));
    }
    const T inv_w = T(1) / static_cast<T>(w);
    T* du = out.raw() + (b * channels + 3) * plane;
    T* dv = out.raw() + (b * channels + 4) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      du[i] = static_cast<T>(f->u[i]) * inv_w;
      dv[i] = static_cast<T>(f->v[i]) * inv_w;
    }
  }
  return out;
}

template struct PredictionBatch<float>;
template struct PredictionBatch<double>;
template class Network<float>;
template class Network<double>;
template Tensor<float> pad_to_16(const Tensor<float>&, CropRecord*);
template Tensor<double> pad_to_16(const Tensor<double>&, CropRecord*);
template Tensor<float> crop_padding(const Tensor<float>&, const CropRecord&);
template Tensor<double> crop_padding(const Tensor<double>&, const CropRecord&);
template Tensor<float> assemble_input(const Tensor<float>&, std::span<const FlowField* const>, const NetworkSpec&);
template Tensor<double> assemble_input(const Tensor<double>&, std::span<const FlowField* const>, const NetworkSpec&);

}  // namespace dfnet
