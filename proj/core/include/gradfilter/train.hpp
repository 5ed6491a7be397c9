#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradfilter/data.hpp"
#include "gradfilter/model.hpp"

namespace gradfilter {

struct TrainCfg {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_threshold = 2.0;
  std::size_t warmup_epochs = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct TrainMetrics {
  std::vector<EpochMetrics> epochs;
  double initial_val_acc = 0.0;
  double best_val_acc = 0.0;  ///< max over the initial and per-epoch accuracies
  /// Analytic backward FLOPs summed over every sample of every step.
  std::uint64_t training_flops = 0;
  /// Same, per conv layer in model order (0 for frozen layers).
  std::vector<std::uint64_t> conv_layer_flops;
  /// Largest number of activation elements conv layers held for backward.
  std::size_t peak_stored_activation_elements = 0;
  std::size_t steps = 0;
  std::size_t samples_seen = 0;
};

/// Per-sample analytic backward cost of one conv layer under its mode.
std::uint64_t conv_layer_bp_flops(const Model& model, std::size_t layer_index);

/// Deterministic given cfg.seed and the model's current parameters.
TrainMetrics train(Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainCfg& cfg);

/// Fraction of argmax-correct predictions (ties go to the lowest class).
double evaluate(Model& model, const Dataset& dataset, std::size_t batch_size = 256);

}  // namespace gradfilter
