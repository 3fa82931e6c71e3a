#pragma once

#include "dfnet/tensor.hpp"

namespace dfnet {

/// Geometry of a 2-D convolution (or its transpose). Stride is shared by both axes.
struct ConvSpec {
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int in_channels = 1;
  int out_channels = 1;

  void validate() const;
};

/// floor((in + 2*pad - kernel) / stride) + 1; throws when the result is not positive.
int conv_output_extent(int in, int kernel, int pad, int stride);

/// Transposed-convolution extent, (in - 1) * stride - 2 * pad + kernel.
int deconv_output_extent(int in, int kernel, int pad, int stride);

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

// Strided convolution. input [n,c_in,h,w], weights [c_out,c_in,k_h,k_w], bias [c_out].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input,
                             const Tensor<T>& weights, const ConvSpec& spec);

// Transposed convolution. input [n,c_in,h,w], weights [c_in,c_out,k_h,k_w], bias [c_out].
// The spec must satisfy kernel - 2*pad == stride on both axes so that the
// output is exactly stride times the input.
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                           const ConvSpec& spec);

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input,
                               const Tensor<T>& weights, const ConvSpec& spec);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Passes gradient where saved_input > 0; the subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input);

}  // namespace dfnet
