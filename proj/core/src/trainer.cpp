#include "amber/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace amber {

std::vector<double> TrainConfig::resolved_supervision_weights() const {
  return supervision_weights.empty() ? default_supervision_weights(1 + kNumStages)
                                     : supervision_weights;
}

void TrainConfig::validate() const {
  sgd.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(loss_epsilon > 0.0)) throw ConfigError("train.loss_epsilon must be > 0");
  const auto w = resolved_supervision_weights();
  if (w.size() != 1 + kNumStages) {
    throw ConfigError("train.supervision_weights needs 5 entries (main + 4 stages)");
  }
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw ConfigError("train.supervision_weights entries must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("train.supervision_weights must sum to 1");
}

template <typename T>
Volume<T> stack_images(const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw ConfigError("empty batch");
  const Shape5 s0 = samples.front()->image.shape();
  Volume<T> out(Shape5{samples.size(), s0.d, s0.h, s0.w, s0.c});
  const std::size_t per = s0.voxels() * s0.c;
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const Shape5& s = samples[b]->image.shape();
    if (s.b != 1 || s.d != s0.d || s.h != s0.h || s.w != s0.w || s.c != s0.c) {
      throw ConfigError("sample '" + samples[b]->id + "' shape " + s.str() + " differs from " +
                        s0.str());
    }
    std::copy(samples[b]->image.data().begin(), samples[b]->image.data().end(),
              out.data().begin() + static_cast<long>(b * per));
  }
  return out;
}

template <typename T>
LabelMask predict(SegmentationModel<T>& model, const Volume<float>& image) {
  const Volume<T> x = cast_volume<T>(image);
  ModelOutput<T> out = model.forward(x, false);
  return argmax_labels(out.logits, 0);
}

template <typename T>
double mean_dsc(SegmentationModel<T>& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw InputError("no samples");
  double sum = 0.0;
  for (const auto& s : samples) {
    const LabelMask pred = predict(model, s.image);
    sum += evaluate(pred, s.mask, model.config().num_classes).mean_dsc;
  }
  return sum / static_cast<double>(samples.size());
}

template <typename T>
double loss_and_gradients(SegmentationModel<T>& model, const Volume<T>& images,
                          const std::vector<LabelMask>& truth, const TrainConfig& config) {
  ModelCache<T> cache;
  ModelOutput<T> out = model.forward(images, true, &cache);
  SupervisionGrads<T> grads;
  const double loss = deep_supervised_loss(out.logits, out.aux, truth,
                                           config.resolved_supervision_weights(),
                                           config.loss_epsilon, &grads);
  model.parameters().zero_grad();
  model.backward(cache, grads.main, grads.aux);
  return loss;
}

template <typename T>
TrainReport train(SegmentationModel<T>& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& heldout, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw InputError("no samples in the training set");
  for (const auto& s : train_set) check_labels(s.mask, model.config().num_classes);

  Sgd<T> opt(config.sgd);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t step = 0;
  bool done = false;
  for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps && step >= config.max_steps) {
        done = true;
        break;
      }
      std::vector<const Sample*> batch;
      std::vector<LabelMask> truth;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
        truth.push_back(train_set[order[i]].mask);
      }
      const double loss = loss_and_gradients(model, stack_images<T>(batch), truth, config);
      if (!std::isfinite(loss)) {
        throw DivergenceError("loss became non-finite at step " + std::to_string(step), static_cast<long>(step));
      }
      opt.step(model.parameters());
      report.step_losses.push_back(loss);
      loss_sum += loss;
      ++epoch_steps;
      ++step;
    }
    if (epoch_steps == 0) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = step;
    rec.mean_loss = loss_sum / static_cast<double>(epoch_steps);
    if (!heldout.empty()) rec.heldout_dsc = mean_dsc(model, heldout);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.max_steps && step >= config.max_steps) done = true;
  }
  return report;
}

#define AMBER_INSTANTIATE(T)                                                                      \
  template Volume<T> stack_images<T>(const std::vector<const Sample*>&);                          \
  template LabelMask predict<T>(SegmentationModel<T>&, const Volume<float>&);                     \
  template double mean_dsc<T>(SegmentationModel<T>&, const std::vector<Sample>&);                 \
  template double loss_and_gradients<T>(SegmentationModel<T>&, const Volume<T>&,                  \
                                        const std::vector<LabelMask>&, const TrainConfig&);       \
  template TrainReport train<T>(SegmentationModel<T>&, const std::vector<Sample>&,                \
                                const std::vector<Sample>&, const TrainConfig&,                   \
                                const std::function<void(const EpochRecord&)>&);

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)

}  // namespace amber
