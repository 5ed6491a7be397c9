#include "gradfilter/train.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gradfilter/optim.hpp"
#include "gradfilter/rng.hpp"

namespace gradfilter {

void TrainCfg::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (base_lr < 0.0 || momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("train: lr, momentum and weight_decay must be non-negative");
  }
  if (!(clip_threshold > 0.0)) throw ConfigError("train: clip threshold must be > 0");
}

std::uint64_t conv_layer_bp_flops(const Model& model, std::size_t layer_index) {
  const auto& c = std::get<ConvLayer>(model.layers().at(layer_index));
  const LayerCfg cfg = model.layer_cfg(layer_index);
  switch (c.mode.kind) {
    case ConvMode::Kind::vanilla: return vanilla_bp_flops(cfg);
    case ConvMode::Kind::filtered: return filtered_bp_flops(cfg, c.mode.r).flops;
    case ConvMode::Kind::frozen: return 0;
  }
  return 0;
}

double evaluate(Model& model, const Dataset& dataset, std::size_t batch_size) {
  const std::size_t n = dataset.size();
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Dataset batch = dataset.subset(idx);
    const Tensor4 logits = model.forward(batch.images, false);
    const std::size_t k = logits.shape().d1;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (argmax(logits.values().subspan(i * k, k)) == batch.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainMetrics train(Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainCfg& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  train_set.validate();
  val_set.validate();
  if (train_set.class_count > model.output_shape().d1) {
    throw ConfigError("train: dataset has " + std::to_string(train_set.class_count) +
                      " classes, model emits " + std::to_string(model.output_shape().d1));
  }

  const auto convs = model.conv_indices();
  std::vector<std::uint64_t> per_sample_flops;
  for (std::size_t i : convs) per_sample_flops.push_back(conv_layer_bp_flops(model, i));

  TrainMetrics metrics;
  metrics.conv_layer_flops.assign(convs.size(), 0);
  metrics.initial_val_acc = evaluate(model, val_set);
  metrics.best_val_acc = metrics.initial_val_acc;

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches;
  const std::size_t warmup_steps = cfg.warmup_epochs * batches;

  Rng rng(cfg.seed);
  SgdState opt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Dataset batch = train_set.subset(idx);

      const Tensor4 logits = model.forward(batch.images, true);
      metrics.peak_stored_activation_elements =
          std::max(metrics.peak_stored_activation_elements, model.stored_activation_elements());
      const LossResult loss = cross_entropy(logits, batch.labels);
      const std::size_t k = logits.shape().d1;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (argmax(logits.values().subspan(i * k, k)) == batch.labels[i]) ++correct;
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());

      model.backward(loss.grad);
      const auto params = model.trainable_params();
      clip_grad_l2(params, cfg.clip_threshold);
      em.lr = cosine_lr(metrics.steps, total_steps, cfg.base_lr, warmup_steps);
      sgd_step(params, em.lr, cfg.momentum, cfg.weight_decay, opt);
      model.clear_caches();

      for (std::size_t j = 0; j < convs.size(); ++j) {
        metrics.conv_layer_flops[j] += per_sample_flops[j] * idx.size();
      }
      ++metrics.steps;
      metrics.samples_seen += idx.size();
    }
    em.train_loss = loss_sum / static_cast<double>(n);
    em.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    em.val_acc = evaluate(model, val_set);
    metrics.best_val_acc = std::max(metrics.best_val_acc, em.val_acc);
    metrics.epochs.push_back(em);
  }
  metrics.training_flops =
      std::accumulate(metrics.conv_layer_flops.begin(), metrics.conv_layer_flops.end(), std::uint64_t{0});
  return metrics;
}

}  // namespace gradfilter
