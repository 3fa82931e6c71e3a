#include "dfnet/conv.hpp"

#include <Eigen/Core>
#include <string>

#include "dfnet/error.hpp"

namespace dfnet {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct Geometry {
  int channels, height, width;  // the "image" side of the lowering
  int kernel_h, kernel_w, stride, pad_h, pad_w;
  int out_h, out_w;  // the "grid" side (conv output / deconv input)
};

// Lowers an image [channels,height,width] into a (channels*k_h*k_w) x (out_h*out_w) matrix.
template <typename T>
void im2col(const T* image, const Geometry& g, T* cols) {
  const int grid = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        T* row = cols + (static_cast<std::size_t>(c) * g.kernel_h * g.kernel_w + ky * g.kernel_w + kx) * grid;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_h + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_w + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into an image buffer.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* image) {
  const int grid = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        const T* row =
            cols + (static_cast<std::size_t>(c) * g.kernel_h * g.kernel_w + ky * g.kernel_w + kx) * grid;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_h + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_w + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

template <typename T>
void check_4d(const Tensor<T>& t, const char* name) {
  require(t.rank() == 4, std::string(name) + " must be 4-D, got " + shape_to_string(t.shape()));
}

template <typename T>
void check_conv_params(const Tensor<T>& weights, const Tensor<T>& bias, const ConvSpec& spec,
                       bool transposed) {
  spec.validate();
  const Shape expected = transposed
      ? Shape{std::size_t(spec.in_channels), std::size_t(spec.out_channels), std::size_t(spec.kernel_h),
              std::size_t(spec.kernel_w)}
      : Shape{std::size_t(spec.out_channels), std::size_t(spec.in_channels), std::size_t(spec.kernel_h),
              std::size_t(spec.kernel_w)};
  require(weights.shape() == expected, "weight shape " + shape_to_string(weights.shape()) +
                                           " does not match spec " + shape_to_string(expected));
  require(bias.shape() == Shape{std::size_t(spec.out_channels)},
          "bias shape " + shape_to_string(bias.shape()) + " does not match out_channels " +
              std::to_string(spec.out_channels));
}

void check_deconv_multiple(const ConvSpec& spec) {
  require(spec.kernel_h - 2 * spec.pad_h == spec.stride && spec.kernel_w - 2 * spec.pad_w == spec.stride,
          "transposed convolution requires kernel - 2*pad == stride for an exact x" +
              std::to_string(spec.stride) + " upsample (kernel " + std::to_string(spec.kernel_h) + "x" +
              std::to_string(spec.kernel_w) + ", pad " + std::to_string(spec.pad_h) + "," +
              std::to_string(spec.pad_w) + ")");
}

}  // namespace

void ConvSpec::validate() const {
  require(kernel_h >= 1 && kernel_w >= 1, "kernel extents must be >= 1");
  require(stride >= 1, "stride must be >= 1");
  require(pad_h >= 0 && pad_w >= 0, "padding must be >= 0");
  require(in_channels >= 1 && out_channels >= 1, "channel counts must be >= 1");
}

int conv_output_extent(int in, int kernel, int pad, int stride) {
  require(stride >= 1, "stride must be >= 1");
  const int span = in + 2 * pad - kernel;
  require(span >= 0, "input extent " + std::to_string(in) + " with pad " + std::to_string(pad) +
                         " is smaller than kernel " + std::to_string(kernel));
  return span / stride + 1;
}

int deconv_output_extent(int in, int kernel, int pad, int stride) {
  const int out = (in - 1) * stride - 2 * pad + kernel;
  require(in >= 1 && out >= 1, "non-positive transposed convolution output extent");
  return out;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         const ConvSpec& spec) {
  check_4d(input, "conv input");
  check_conv_params(weights, bias, spec, false);
  require(int(input.dim(1)) == spec.in_channels, "conv input has " + std::to_string(input.dim(1)) +
                                                     " channels, spec expects " +
                                                     std::to_string(spec.in_channels));
  const int n = int(input.dim(0)), h = int(input.dim(2)), w = int(input.dim(3));
  const Geometry g{spec.in_channels, h, w, spec.kernel_h, spec.kernel_w, spec.stride, spec.pad_h, spec.pad_w,
                   conv_output_extent(h, spec.kernel_h, spec.pad_h, spec.stride),
                   conv_output_extent(w, spec.kernel_w, spec.pad_w, spec.stride)};
  const int rows = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const int grid = g.out_h * g.out_w;

  Tensor<T> out(Shape{std::size_t(n), std::size_t(spec.out_channels), std::size_t(g.out_h), std::size_t(g.out_w)});
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * grid);
  ConstMatMap<T> wmat(weights.raw(), spec.out_channels, rows);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.raw(), spec.out_channels);
  const std::size_t in_stride = std::size_t(spec.in_channels) * h * w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * grid;
  for (int b = 0; b < n; ++b) {
    im2col(input.raw() + b * in_stride, g, cols.data());
    MatMap<T> omat(out.raw() + b * out_stride, spec.out_channels, grid);
    omat.noalias() = wmat * ConstMatMap<T>(cols.data(), rows, grid);
    omat.colwise() += bvec;
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input,
                             const Tensor<T>& weights, const ConvSpec& spec) {
  check_4d(saved_input, "saved input");
  check_4d(output_grad, "output gradient");
  Tensor<T> bias_shape(Shape{std::size_t(spec.out_channels)});
  check_conv_params(weights, bias_shape, spec, false);
  require(int(saved_input.dim(1)) == spec.in_channels, "saved input channels do not match spec");
  const int n = int(saved_input.dim(0)), h = int(saved_input.dim(2)), w = int(saved_input.dim(3));
  const Geometry g{spec.in_channels, h, w, spec.kernel_h, spec.kernel_w, spec.stride, spec.pad_h, spec.pad_w,
                   conv_output_extent(h, spec.kernel_h, spec.pad_h, spec.stride),
                   conv_output_extent(w, spec.kernel_w, spec.pad_w, spec.stride)};
  const Shape expected_out{std::size_t(n), std::size_t(spec.out_channels), std::size_t(g.out_h),
                           std::size_t(g.out_w)};
  require(output_grad.shape() == expected_out, "output gradient shape " + shape_to_string(output_grad.shape()) +
                                                   " does not match forward output " +
                                                   shape_to_string(expected_out));
  const int rows = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const int grid = g.out_h * g.out_w;

  ConvGrads<T> grads{Tensor<T>(saved_input.shape()), Tensor<T>(weights.shape()), std::move(bias_shape)};
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * grid);
  ConstMatMap<T> wmat(weights.raw(), spec.out_channels, rows);
  MatMap<T> dw(grads.weights.raw(), spec.out_channels, rows);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grads.bias.raw(), spec.out_channels);
  const std::size_t in_stride = std::size_t(spec.in_channels) * h * w;
  const std::size_t out_stride = std::size_t(spec.out_channels) * grid;
  for (int b = 0; b < n; ++b) {
    ConstMatMap<T> dy(output_grad.raw() + b * out_stride, spec.out_channels, grid);
    im2col(saved_input.raw() + b * in_stride, g, cols.data());
    dw.noalias() += dy * ConstMatMap<T>(cols.data(), rows, grid).transpose();
    db += dy.rowwise().sum();
    MatMap<T>(cols.data(), rows, grid).noalias() = wmat.transpose() * dy;
    col2im(cols.data(), g, grads.input.raw() + b * in_stride);
  }
  return grads;
}

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                           const ConvSpec& spec) {
  check_4d(input, "deconv input");
  check_conv_params(weights, bias, spec, true);
  check_deconv_multiple(spec);
  require(int(input.dim(1)) == spec.in_channels, "deconv input has " + std::to_string(input.dim(1)) +
                                                     " channels, spec expects " +
                                                     std::to_string(spec.in_channels));
  const int n = int(input.dim(0)), h = int(input.dim(2)), w = int(input.dim(3));
  const int oh = deconv_output_extent(h, spec.kernel_h, spec.pad_h, spec.stride);
  const int ow = deconv_output_extent(w, spec.kernel_w, spec.pad_w, spec.stride);
  const Geometry g{spec.out_channels, oh, ow, spec.kernel_h, spec.kernel_w, spec.stride, spec.pad_h, spec.pad_w,
                   h, w};
  const int rows = spec.out_channels * spec.kernel_h * spec.kernel_w;
  const int grid = h * w;

  Tensor<T> out(Shape{std::size_t(n), std::size_t(spec.out_channels), std::size_t(oh), std::size_t(ow)});
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * grid);
  ConstMatMap<T> wmat(weights.raw(), spec.in_channels, rows);
  const std::size_t in_stride = std::size_t(spec.in_channels) * grid;
  const std::size_t out_plane = std::size_t(oh) * ow;
  const std::size_t out_stride = std::size_t(spec.out_channels) * out_plane;
  for (int b = 0; b < n; ++b) {
    MatMap<T>(cols.data(), rows, grid).noalias() =
        wmat.transpose() * ConstMatMap<T>(input.raw() + b * in_stride, spec.in_channels, grid);
    T* dst = out.raw() + b * out_stride;
    col2im(cols.data(), g, dst);
    for (int c = 0; c < spec.out_channels; ++c) {
      T* plane = dst + c * out_plane;
      const T bc = bias[c];
      for (std::size_t i = 0; i < out_plane; ++i) plane[i] += bc;
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input,
                               const Tensor<T>& weights, const ConvSpec& spec) {
  check_4d(saved_input, "saved input");
  check_4d(output_grad, "output gradient");
  Tensor<T> bias_shape(Shape{std::size_t(spec.out_channels)});
  check_conv_params(weights, bias_shape, spec, true);
  check_deconv_multiple(spec);
  require(int(saved_input.dim(1)) == spec.in_channels, "saved input channels do not match spec");
  const int n = int(saved_input.dim(0)), h = int(saved_input.dim(2)), w = int(saved_input.dim(3));
  const int oh = deconv_output_extent(h, spec.kernel_h, spec.pad_h, spec.stride);
  const int ow = deconv_output_extent(w, spec.kernel_w, spec.pad_w, spec.stride);
  const Shape expected_out{std::size_t(n), std::size_t(spec.out_channels), std::size_t(oh), std::size_t(ow)};
  require(output_grad.shape() == expected_out, "output gradient shape " + shape_to_string(output_grad.shape()) +
                                                   " does not match forward output " +
                                                   shape_to_string(expected_out));
  const Geometry g{spec.out_channels, oh, ow, spec.kernel_h, spec.kernel_w, spec.stride, spec.pad_h, spec.pad_w,
                   h, w};
  const int rows = spec.out_channels * spec.kernel_h * spec.kernel_w;
  const int grid = h * w;

  ConvGrads<T> grads{Tensor<T>(saved_input.shape()), Tensor<T>(weights.shape()), std::move(bias_shape)};
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * grid);
  ConstMatMap<T> wmat(weights.raw(), spec.in_channels, rows);
  MatMap<T> dw(grads.weights.raw(), spec.in_channels, rows);
  const std::size_t in_stride = std::size_t(spec.in_channels) * grid;
  const std::size_t out_plane = std::size_t(oh) * ow;
  const std::size_t out_stride = std::size_t(spec.out_channels) * out_plane;
  for (int b = 0; b < n; ++b) {
    const T* dy = output_grad.raw() + b * out_stride;
    im2col(dy, g, cols.data());
    ConstMatMap<T> dcols(cols.data(), rows, grid);
    MatMap<T>(grads.input.raw() + b * in_stride, spec.in_channels, grid).noalias() = wmat * dcols;
    dw.noalias() += ConstMatMap<T>(saved_input.raw() + b * in_stride, spec.in_channels, grid) * dcols.transpose();
    for (int c = 0; c < spec.out_channels; ++c) {
      const T* plane = dy + c * out_plane;
      T acc{0};
      for (std::size_t i = 0; i < out_plane; ++i) acc += plane[i];
      grads.bias[c] += acc;
    }
  }
  return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output_grad, const Tensor<T>& saved_input) {
  require(output_grad.shape() == saved_input.shape(), "relu gradient shape mismatch");
  Tensor<T> out(saved_input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = saved_input[i] > T{0} ? output_grad[i] : T{0};
  return out;
}

#define DFNET_INSTANTIATE(T)                                                                           \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvSpec&); \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                        const ConvSpec&);                                                   \
  template Tensor<T> deconv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                                      const ConvSpec&);                                                     \
  template ConvGrads<T> deconv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                          const ConvSpec&);                                                 \
  template Tensor<T> relu(const Tensor<T>&);                                                                \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);

DFNET_INSTANTIATE(float)
DFNET_INSTANTIATE(double)
#undef DFNET_INSTANTIATE

}  // namespace dfnet
