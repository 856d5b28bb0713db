#include "amber/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace amber {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t parameter_seed(std::uint64_t master_seed, std::string_view name) {
  // splitmix64 finalizer over the mixed pair
  std::uint64_t z = master_seed ^ fnv1a64(name);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
void fill_init(Parameter<T>& p, std::uint64_t seed) {
  auto data = p.value.data();
  switch (p.init) {
    case InitKind::zeros:
      std::fill(data.begin(), data.end(), T(0));
      return;
    case InitKind::ones:
      std::fill(data.begin(), data.end(), T(1));
      return;
    case InitKind::trunc_normal: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> nd(0.0, 1.0);
      for (auto& v : data) {
        double z = nd(rng);
        while (std::abs(z) > 2.0) z = nd(rng);
        v = static_cast<T>(0.02 * z);
      }
      return;
    }
    case InitKind::kaiming: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(p.fan_in)));
      for (auto& v : data) v = static_cast<T>(nd(rng));
      return;
    }
  }
}

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, std::vector<std::size_t> shape,
                                     InitKind init, std::size_t fan_in, bool complex) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  std::vector<std::size_t> storage_shape = shape;
  if (complex) storage_shape.push_back(2);
  Parameter<T> p;
  p.name = name;
  p.shape = std::move(shape);
  p.value = Tensor<T>(storage_shape);
  p.grad = Tensor<T>(storage_shape);
  p.init = init;
  p.fan_in = std::max<std::size_t>(fan_in, 1);
  p.complex = complex;
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Parameter<T>& ParameterStore<T>::add_buffer(const std::string& name,
                                            std::vector<std::size_t> shape, InitKind init) {
  Parameter<T>& p = add(name, std::move(shape), init);
  p.trainable = false;
  return p;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
void ParameterStore<T>::initialize(std::uint64_t master_seed) {
  for (auto& p : params_) fill_init(p, parameter_seed(master_seed, p.name));
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), T(0));
}

template <typename T>
std::size_t ParameterStore<T>::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.scalar_count();
  return n;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void fill_init<float>(Parameter<float>&, std::uint64_t);
template void fill_init<double>(Parameter<double>&, std::uint64_t);

}  // namespace amber
