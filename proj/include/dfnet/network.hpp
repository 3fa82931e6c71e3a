#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfnet/conv.hpp"
#include "dfnet/param_store.hpp"
#include "dfnet/tensor.hpp"

namespace dfnet {

struct FlowField;

enum class InputVariant { SingleImage, ImagePlusFlow };

std::string to_string(InputVariant v);
InputVariant parse_input_variant(const std::string& s);

/// Declarative description of the encoder-decoder.
///
/// The skeleton is fixed: five 3x3 convolutions with strides 2,2,2,1,2
/// (downsample x16), then three transposed convolutions upsampling x2, x2, x4.
/// Only channel widths and input normalization are free. The fields for the
/// fixed parts exist so that a malformed description (for example one parsed
/// from a checkpoint) can be represented and rejected.
struct NetworkSpec {
  InputVariant variant = InputVariant::ImagePlusFlow;
  std::vector<int> encoder_channels{32, 64, 128, 256, 256};
  std::vector<int> encoder_strides{2, 2, 2, 1, 2};
  std::vector<int> decoder_upsamples{2, 2, 4};
  std::vector<int> decoder_channels{128, 64, 1};
  int kernel = 3;
  std::string output_mode = "log_depth";
  /// Per-channel RGB means subtracted after scaling to [0,1].
  std::array<double, 3> input_mean{0.0, 0.0, 0.0};

  int input_channels() const { return variant == InputVariant::ImagePlusFlow ? 5 : 3; }

  /// Throws UsageError when the fixed skeleton is violated.
  void validate() const;

  /// Canonical text form, e.g.
  /// "dfnet-arch v1; variant=image_plus_flow; in=5; enc=32,64,128,256,256; strides=2,2,2,1,2;
  ///  kernel=3; dec=128,64,1; up=2,2,4; output=log_depth; mean=0.4,0.4,0.4"
  std::string to_descriptor() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Parses a descriptor. Keys that are not part of NetworkSpec are returned in `extra`.
NetworkSpec parse_descriptor(const std::string& descriptor, std::map<std::string, std::string>* extra = nullptr);

/// Closed-form parameter count for a spec.
std::size_t expected_parameter_count(const NetworkSpec& spec);

ConvSpec encoder_layer_spec(const NetworkSpec& spec, int layer);
ConvSpec decoder_layer_spec(const NetworkSpec& spec, int layer);

template <typename T>
struct PredictionBatch {
  Tensor<T> log_depth;  // [n,1,H,W]
  Tensor<T> metric_depth() const;
};

/// Activations kept from a forward pass for the matching backward pass.
template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> layer_inputs;
  std::vector<Tensor<T>> pre_activations;
  const Tensor<T>& bottleneck() const { return pre_activations.at(4); }
};

template <typename T>
class Network {
 public:
  /// Builds and initializes parameters deterministically from `seed`.
  Network(NetworkSpec spec, std::uint64_t seed);
  /// Adopts existing parameters; shapes are checked against the spec.
  Network(NetworkSpec spec, ParamStore<T> params);

  const NetworkSpec& spec() const { return spec_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Input [n, input_channels, H, W] with H and W divisible by 16. Passing a cache
  /// records activations for backward(); the network itself is not modified.
  PredictionBatch<T> forward(const Tensor<T>& input, ForwardCache<T>* cache = nullptr) const;

  /// Accumulates d(loss)/d(param) into the parameter gradient slots and returns
  /// d(loss)/d(input).
  Tensor<T> backward(const ForwardCache<T>& cache, const Tensor<T>& log_depth_grad);

 private:
  void check_params() const;

  NetworkSpec spec_;
  ParamStore<T> params_;
};

struct CropRecord {
  std::size_t height = 0;  // original extents
  std::size_t width = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_right = 0;
  bool empty() const { return pad_bottom == 0 && pad_right == 0; }
};

std::size_t round_up_to_16(std::size_t extent);

/// Zero-pads the two trailing (spatial) axes on the bottom/right up to multiples of 16.
template <typename T>
Tensor<T> pad_to_16(const Tensor<T>& image, CropRecord* record);

template <typename T>
Tensor<T> crop_padding(const Tensor<T>& padded, const CropRecord& record);

/// Builds the network input from a batch of RGB images [n,3,H,W] in [0,1].
/// Channels 0-2 are mean-subtracted RGB; channels 3-4 are flow u,v divided by
/// the image width. `flows` must hold one field per image for the flow variant
/// and be empty otherwise.
template <typename T>
Tensor<T> assemble_input(const Tensor<T>& images, std::span<const FlowField* const> flows, const NetworkSpec& spec);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace dfnet
