#include "amber/loss.hpp"

#include <cmath>
#include <string>

#include "amber/ops.hpp"

namespace amber {

template <typename T>
double hybrid_loss(const Volume<T>& probs, const Volume<T>& target, double eps, Volume<T>* grad) {
  const Shape5& s = probs.shape();
  if (!(s == target.shape())) {
    throw ConfigError("hybrid_loss: prediction " + s.str() + " vs target " +
                      target.shape().str());
  }
  const std::size_t I = s.voxels(), J = s.c;
  const double inv_j = 1.0 / static_cast<double>(J), inv_i = 1.0 / static_cast<double>(I);
  const double inv_b = 1.0 / static_cast<double>(s.b);
  if (grad) *grad = Volume<T>(s);
  double total = 0.0;
  std::vector<double> num(J), den(J);
  for (std::size_t b = 0; b < s.b; ++b) {
    const T* P = probs.data().data() + b * I * J;
    const T* G = target.data().data() + b * I * J;
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), eps);
    double ce = 0.0;
    for (std::size_t i = 0; i < I * J; ++i) {
      const double p = P[i], g = G[i];
      if (p < 0.0) throw InputError("hybrid_loss: negative probability at element " + std::to_string(i));
      const std::size_t j = i % J;
      num[j] += g * p;
      den[j] += g * g + p * p;
      if (g != 0.0) ce += g * std::log(p + eps);
    }
    double dice = 0.0;
    for (std::size_t j = 0; j < J; ++j) dice += num[j] / den[j];
    total += 1.0 - 2.0 * inv_j * dice - inv_i * ce;
    if (grad) {
      T* dP = grad->data().data() + b * I * J;
      for (std::size_t i = 0; i < I * J; ++i) {
        const std::size_t j = i % J;
        const double p = P[i], g = G[i];
        const double d_dice = (g * den[j] - 2.0 * num[j] * p) / (den[j] * den[j]);
        dP[i] = static_cast<T>(inv_b * (-2.0 * inv_j * d_dice - inv_i * g / (p + eps)));
      }
    }
  }
  return total * inv_b;
}

std::vector<double> default_supervision_weights(std::size_t count) {
  std::vector<double> w(count);
  double sum = 0.0, v = 1.0;
  for (auto& x : w) {
    x = v;
    sum += v;
    v *= 0.5;
  }
  for (auto& x : w) x /= sum;
  return w;
}

template <typename T>
double deep_supervised_loss(const Volume<T>& main_logits, const std::vector<Volume<T>>& aux_logits,
                            const std::vector<LabelMask>& truth, const std::vector<double>& weights,
                            double eps, SupervisionGrads<T>* grads) {
  if (weights.size() != 1 + aux_logits.size()) {
    throw ConfigError("deep supervision: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(1 + aux_logits.size()) + " heads");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("deep supervision weights must be non-negative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("deep supervision weights must sum to 1");
  const std::size_t J = main_logits.shape().c;

  auto head = [&](const Volume<T>& logits, const std::vector<LabelMask>& masks, double w,
                  Volume<T>* g_logits) {
    const Volume<T> probs = softmax_channels(logits);
    const Volume<T> target = one_hot<T>(masks, J);
    if (!g_logits || w == 0.0) {
      if (g_logits) *g_logits = Volume<T>(logits.shape());
      return w == 0.0 ? 0.0 : w * hybrid_loss(probs, target, eps);
    }
    Volume<T> g_probs;
    const double v = hybrid_loss(probs, target, eps, &g_probs);
    for (auto& x : g_probs.data()) x = static_cast<T>(x * w);
    *g_logits = softmax_channels_backward(probs, g_probs);
    return w * v;
  };

  double total = head(main_logits, truth, weights[0], grads ? &grads->main : nullptr);
  if (grads) grads->aux.assign(aux_logits.size(), Volume<T>{});
  for (std::size_t k = 0; k < aux_logits.size(); ++k) {
    std::vector<LabelMask> down;
    for (const auto& m : truth) down.push_back(downsample_nearest(m, spatial(aux_logits[k].shape())));
    total += head(aux_logits[k], down, weights[k + 1], grads ? &grads->aux[k] : nullptr);
  }
  return total;
}

template double hybrid_loss<float>(const Volume<float>&, const Volume<float>&, double,
                                   Volume<float>*);
template double hybrid_loss<double>(const Volume<double>&, const Volume<double>&, double,
                                    Volume<double>*);
template double deep_supervised_loss<float>(const Volume<float>&, const std::vector<Volume<float>>&,
                                            const std::vector<LabelMask>&,
                                            const std::vector<double>&, double,
                                            SupervisionGrads<float>*);
template double deep_supervised_loss<double>(const Volume<double>&,
                                             const std::vector<Volume<double>>&,
                                             const std::vector<LabelMask>&,
                                             const std::vector<double>&, double,
                                             SupervisionGrads<double>*);

}  // namespace amber
