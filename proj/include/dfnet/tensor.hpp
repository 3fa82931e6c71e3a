#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace dfnet {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage so vectorized kernels see the same alignment on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/**
 * Dense row-major n-dimensional array with an optional gradient slot.
 *
 * The 4-D layout used throughout the network is (batch, channels, height,
 * width). Training runs on Tensor<float>; gradient checks use Tensor<double>.
 */
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 4-D accessors; no bounds checks.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool has_grad() const { return has_grad_; }
  /// Allocates a zeroed gradient buffer if none exists.
  void ensure_grad();
  void zero_grad();
  void drop_grad();
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  void fill(T value);

 private:
  Shape shape_;
  AlignedVector<T> data_;
  AlignedVector<T> grad_;
  bool has_grad_ = false;
};

/// Elementwise conversion between precisions (gradient slot is not copied).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
  return Tensor<To>(src.shape(), std::move(out));
}

template <typename T>
bool all_finite(std::span<const T> values);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace dfnet
