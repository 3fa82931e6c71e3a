#include "dfnet/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "dfnet/error.hpp"

namespace dfnet {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (data_.size() != shape_size(shape_)) {
    throw UsageError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

template <typename T>
void Tensor<T>::ensure_grad() {
  if (!has_grad_) {
    grad_.assign(data_.size(), T{0});
    has_grad_ = true;
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), T{0});
}

template <typename T>
void Tensor<T>::drop_grad() {
  grad_.clear();
  grad_.shrink_to_fit();
  has_grad_ = false;
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class Tensor<float>;
template class Tensor<double>;
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

}  // namespace dfnet
