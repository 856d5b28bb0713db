#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "amber/tensor.hpp"

namespace amber {

enum class InitKind {
  zeros,
  ones,
  trunc_normal,  // sigma 0.02, truncated at two sigma
  kaiming,       // normal, std sqrt(2 / fan_in)
};

/// Named trainable tensor (or non-trainable buffer) with its gradient accumulator.
/// Complex tensors store interleaved (re, im) pairs; `shape` is the logical complex shape.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  Tensor<T> value;
  Tensor<T> grad;
  InitKind init = InitKind::zeros;
  std::size_t fan_in = 1;
  bool trainable = true;
  bool complex = false;

  std::size_t scalar_count() const { return value.size(); }
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Deterministic per-tensor seed from the master seed and the tensor name.
std::uint64_t parameter_seed(std::uint64_t master_seed, std::string_view name);

/// Ordered registry. References returned by add() stay valid for the store's lifetime.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, std::vector<std::size_t> shape, InitKind init,
                    std::size_t fan_in = 1, bool complex = false);
  Parameter<T>& add_buffer(const std::string& name, std::vector<std::size_t> shape, InitKind init);

  Parameter<T>& get(std::string_view name);
  const Parameter<T>& get(std::string_view name) const;
  Parameter<T>* find(std::string_view name);
  const Parameter<T>* find(std::string_view name) const;

  std::deque<Parameter<T>>& all() noexcept { return params_; }
  const std::deque<Parameter<T>>& all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  /// Re-draws every tensor from its init kind, seeded per name.
  void initialize(std::uint64_t master_seed);
  void zero_grad();
  /// Real scalars in trainable tensors (buffers excluded).
  std::size_t trainable_scalars() const;

 private:
  std::deque<Parameter<T>> params_;
};

template <typename T>
void fill_init(Parameter<T>& p, std::uint64_t seed);

}  // namespace amber
