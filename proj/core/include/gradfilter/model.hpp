#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradfilter/cost_model.hpp"
#include "gradfilter/layers.hpp"

namespace gradfilter {

/// Sequential CNN built layer by layer from a per-sample input shape.
class Model {
 public:
  /// `channels` x `height` x `width` per sample.
  Model(std::size_t channels, std::size_t height, std::size_t width);

  Model& conv(std::size_t out_channels, std::size_t kernel, std::size_t padding);
  Model& relu();
  Model& avgpool2();
  Model& flatten();
  Model& linear(std::size_t out_features);

  /// Fan-in scaled uniform init: conv weights U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
  /// linear weights U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
  void init(std::uint64_t seed);

  /// Logits (N, K, 1, 1). Training mode saves what backward() needs.
  Tensor4 forward(const Tensor4& x, bool training);

  /// Back-propagates g_logits down to the earliest trainable layer.
  void backward(const Tensor4& g_logits);

  /// Last k conv layers get `mode`, the rest are frozen. Linear layers stay
  /// trainable. Throws ConfigError if k exceeds the conv layer count.
  void set_active_layers(std::size_t k, ConvMode mode);

  void set_partial_patch_mode(PartialPatchMode mode);

  /// Trainable parameter blobs in layer order (weights then bias).
  std::vector<ParamRef> trainable_params();

  [[nodiscard]] std::vector<std::size_t> conv_indices() const;
  [[nodiscard]] std::size_t conv_count() const { return conv_indices().size(); }

  /// Cost-model description of the conv layer at `layer_index`.
  [[nodiscard]] LayerCfg layer_cfg(std::size_t layer_index) const;

  /// Activation elements currently saved by conv layers for backward.
  [[nodiscard]] std::size_t stored_activation_elements() const;

  void clear_caches();

  [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::vector<Layer>& layers() noexcept { return layers_; }
  [[nodiscard]] const Shape4& input_shape() const noexcept { return input_shape_; }
  [[nodiscard]] const Shape4& output_shape() const noexcept { return current_; }

 private:
  Shape4 input_shape_;
  Shape4 current_;
  std::vector<Layer> layers_;
};

/// conv3x3(8) relu pool conv3x3(16) relu pool conv3x3(32) relu flatten linear(K),
/// all convs same-padded.
Model make_desk_model(std::size_t channels, std::size_t height, std::size_t width,
                      std::size_t classes, std::uint64_t seed);

}  // namespace gradfilter
