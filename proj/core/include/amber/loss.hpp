#pragma once

#include <vector>

#include "amber/labels.hpp"
#include "amber/tensor.hpp"

namespace amber {

inline constexpr double kDefaultLossEpsilon = 1e-5;

/// Per-sample 1 - (2/J) sum_j N_j / (sum G^2 + sum P^2 + eps) - (1/I) sum G log(P + eps),
/// averaged over the batch. P and G are (B, D, H, W, J). Writes dL/dP when grad is non-null.
template <typename T>
double hybrid_loss(const Volume<T>& probs, const Volume<T>& target, double eps,
                   Volume<T>* grad = nullptr);

/// Normalized (1, 1/2, 1/4, ...) over `count` heads.
std::vector<double> default_supervision_weights(std::size_t count);

template <typename T>
struct SupervisionGrads {
  Volume<T> main;
  std::vector<Volume<T>> aux;
};

/// Weighted sum of hybrid_loss over softmax(main) vs. G and softmax(aux_k) vs. nearest-downsampled
/// G. `weights` has 1 + aux.size() entries summing to 1. Gradients are w.r.t. the logits.
template <typename T>
double deep_supervised_loss(const Volume<T>& main_logits, const std::vector<Volume<T>>& aux_logits,
                            const std::vector<LabelMask>& truth, const std::vector<double>& weights,
                            double eps, SupervisionGrads<T>* grads = nullptr);

}  // namespace amber
