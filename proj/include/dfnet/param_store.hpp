#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfnet/tensor.hpp"

namespace dfnet {

/// Named, insertion-ordered parameter tensors.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Throws UsageError on a duplicate name.
  Tensor<T>& add(std::string name, Tensor<T> tensor);

  bool contains(std::string_view name) const;
  Tensor<T>& get(std::string_view name);
  const Tensor<T>& get(std::string_view name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const;

  void zero_grads();

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& e : entries_) out.add(e.name, tensor_cast<U>(e.tensor));
    return out;
  }

 private:
  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Fills with U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void init_fan_in_uniform(Tensor<T>& tensor, double fan_in, std::mt19937_64& rng);

/// p <- p - lr * g for every parameter, then clears the gradients.
/// Throws UsageError if a parameter has no gradient slot.
template <typename T>
void sgd_step(ParamStore<T>& params, double lr);

/// SGD with optional heavy-ball momentum (v <- m*v + g; p <- p - lr*v).
/// With momentum 0 this is exactly sgd_step.
template <typename T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.0);
  void step(ParamStore<T>& params, double lr);
  double momentum() const { return momentum_; }

 private:
  double momentum_;
  std::vector<std::vector<T>> velocity_;
};

/// Step decay: base_lr * decay_factor^floor(epoch / decay_every).
double lr_schedule(int epoch, double base_lr, double decay_factor, int decay_every);

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class SgdOptimizer<float>;
extern template class SgdOptimizer<double>;

}  // namespace dfnet
