#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "amber/dataset.hpp"
#include "amber/loss.hpp"
#include "amber/metrics.hpp"
#include "amber/model.hpp"
#include "amber/optimizer.hpp"

namespace amber {

struct TrainConfig {
  SgdConfig sgd;
  std::size_t epochs = 50;
  std::size_t batch_size = 2;
  /// Stops after this many optimizer steps; 0 means no cap.
  std::size_t max_steps = 0;
  /// Main head first, then one per encoder stage. Empty selects the default ladder.
  std::vector<double> supervision_weights;
  double loss_epsilon = kDefaultLossEpsilon;
  std::uint64_t seed = 0;

  std::vector<double> resolved_supervision_weights() const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;        // cumulative optimizer steps
  double mean_loss = 0.0;       // over this epoch's steps
  std::optional<double> heldout_dsc;
  double wall_seconds = 0.0;    // since training started
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
};

/// Stacks samples along the batch axis, converting to T.
template <typename T>
Volume<T> stack_images(const std::vector<const Sample*>& samples);

/// Argmax segmentation of one sample with the model in evaluation mode.
template <typename T>
LabelMask predict(SegmentationModel<T>& model, const Volume<float>& image);

/// Mean foreground DSC over the samples.
template <typename T>
double mean_dsc(SegmentationModel<T>& model, const std::vector<Sample>& samples);

/// One forward/backward pass; leaves gradients in the model. Returns the loss.
template <typename T>
double loss_and_gradients(SegmentationModel<T>& model, const Volume<T>& images,
                          const std::vector<LabelMask>& truth, const TrainConfig& config);

/// Epoch loop with seeded shuffling. Throws DivergenceError on a non-finite loss.
template <typename T>
TrainReport train(SegmentationModel<T>& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& heldout, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace amber
