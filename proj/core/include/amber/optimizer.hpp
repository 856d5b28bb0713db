#pragma once

#include <vector>

#include "amber/parameters.hpp"

namespace amber {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 3e-5;

  void validate() const;
};

/// Momentum SGD with decoupled weight decay:
///   v <- mu v + g;  p <- p - lr (v + wd p).
/// Buffers (non-trainable tensors) are skipped.
template <typename T>
class Sgd {
 public:
  explicit Sgd(const SgdConfig& config) : config_(config) { config_.validate(); }

  void step(ParameterStore<T>& store);
  const SgdConfig& config() const noexcept { return config_; }

 private:
  SgdConfig config_;
  std::vector<std::vector<T>> velocity_;
};

}  // namespace amber
