#include "dfnet/param_store.hpp"

#include <cmath>

#include "dfnet/error.hpp"

namespace dfnet {

template <typename T>
Tensor<T>& ParamStore<T>::add(std::string name, Tensor<T> tensor) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(tensor)});
  return entries_.back().tensor;
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

template <typename T>
Tensor<T>& ParamStore<T>::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].tensor;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].tensor;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
void init_fan_in_uniform(Tensor<T>& tensor, double fan_in, std::mt19937_64& rng) {
  if (!(fan_in > 0)) throw UsageError("fan_in must be positive");
  const double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : tensor.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
void sgd_step(ParamStore<T>& params, double lr) {
  for (const auto& e : params.entries()) {
    if (!e.tensor.has_grad()) throw UsageError("parameter '" + e.name + "' has no gradient");
  }
  const T step = static_cast<T>(lr);
  for (auto& e : params.entries()) {
    auto data = e.tensor.data();
    auto grad = e.tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= step * grad[i];
    e.tensor.zero_grad();
  }
}

template <typename T>
SgdOptimizer<T>::SgdOptimizer(double momentum) : momentum_(momentum) {
  if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must be in [0, 1)");
}

template <typename T>
void SgdOptimizer<T>::step(ParamStore<T>& params, double lr) {
  if (momentum_ == 0.0) {
    sgd_step(params, lr);
    return;
  }
  for (const auto& e : params.entries()) {
    if (!e.tensor.has_grad()) throw UsageError("parameter '" + e.name + "' has no gradient");
  }
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& e : params.entries()) velocity_.emplace_back(e.tensor.size(), T{0});
  }
  const T step = static_cast<T>(lr);
  const T m = static_cast<T>(momentum_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& e = params.entries()[k];
    auto data = e.tensor.data();
    auto grad = e.tensor.grad();
    auto& vel = velocity_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      vel[i] = m * vel[i] + grad[i];
      data[i] -= step * vel[i];
    }
    e.tensor.zero_grad();
  }
}

double lr_schedule(int epoch, double base_lr, double decay_factor, int decay_every) {
  if (decay_every < 1) throw UsageError("decay_every must be >= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw UsageError("decay_factor must be in (0, 1]");
  if (epoch < 0) throw UsageError("epoch must be >= 0");
  return base_lr * std::pow(decay_factor, epoch / decay_every);
}

template class ParamStore<float>;
template class ParamStore<double>;
template class SgdOptimizer<float>;
template class SgdOptimizer<double>;
template void init_fan_in_uniform(Tensor<float>&, double, std::mt19937_64&);
template void init_fan_in_uniform(Tensor<double>&, double, std::mt19937_64&);
template void sgd_step(ParamStore<float>&, double);
template void sgd_step(ParamStore<double>&, double);

}  // namespace dfnet
