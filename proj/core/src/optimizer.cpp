#include "amber/optimizer.hpp"

namespace amber {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
}

template <typename T>
void Sgd<T>::step(ParameterStore<T>& store) {
  auto& params = store.all();
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i].value.size(), T(0));
  }
  const T lr = static_cast<T>(config_.learning_rate);
  const T mu = static_cast<T>(config_.momentum);
  const T wd = static_cast<T>(config_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    if (!p.trainable) continue;
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      v[k] = mu * v[k] + grad[k];
      value[k] -= lr * (v[k] + wd * value[k]);
    }
  }
}

template class Sgd<float>;
template class Sgd<double>;

}  // namespace amber
