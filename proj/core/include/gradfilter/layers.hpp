#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "gradfilter/conv.hpp"
#include "gradfilter/filter.hpp"
#include "gradfilter/tensor.hpp"

namespace gradfilter {

/// How a convolution layer takes part in back-propagation.
struct ConvMode {
  enum class Kind { frozen, vanilla, filtered };
  Kind kind = Kind::vanilla;
  std::size_t r = 1;  ///< patch size, used when kind == filtered

  static ConvMode frozen() { return {Kind::frozen, 1}; }
  static ConvMode vanilla() { return {Kind::vanilla, 1}; }
  static ConvMode filtered(std::size_t r) { return {Kind::filtered, r}; }

  [[nodiscard]] bool trainable() const noexcept { return kind != Kind::frozen; }
  friend bool operator==(const ConvMode&, const ConvMode&) = default;
};

const char* to_string(ConvMode::Kind kind);

/// Mutable view of one parameter blob and its gradient.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
};

struct ConvLayer {
  Kernel4 weights;
  std::vector<double> bias;
  ConvCfg cfg;
  ConvMode mode;
  PartialPatchMode partial = PartialPatchMode::true_mean;

  Shape4 input_shape;   ///< per-sample shape fixed at build time (N = 1)
  Shape4 output_shape;  ///< per-sample

  // Saved by forward() in training mode. A vanilla layer keeps x; a
  // filtered layer keeps only the per-patch sums of x.
  std::optional<Tensor4> saved_input;
  std::optional<PatchGrid> saved_patches;
  Shape4 batch_input_shape;

  Kernel4 grad_weights;
  std::vector<double> grad_bias;

  Tensor4 forward(const Tensor4& x, bool training);
  /// Sets parameter gradients when trainable; returns g_x when
  /// `need_input_grad`.
  std::optional<Tensor4> backward(const Tensor4& g_y, bool need_input_grad);

  [[nodiscard]] std::size_t stored_activation_elements() const noexcept;
  void clear_cache() noexcept;
};

struct ReluLayer {
  Shape4 input_shape;
  std::vector<bool> active;

  Tensor4 forward(const Tensor4& x, bool training);
  Tensor4 backward(const Tensor4& g_y) const;
  void clear_cache() noexcept { active.clear(); }
};

/// 2x2 average pooling with stride 2; a trailing odd row/column is dropped.
struct AvgPool2Layer {
  Shape4 input_shape;
  Shape4 batch_input_shape;

  Tensor4 forward(const Tensor4& x, bool training);
  Tensor4 backward(const Tensor4& g_y) const;
  void clear_cache() noexcept {}
};

struct FlattenLayer {
  Shape4 input_shape;
  Shape4 batch_input_shape;

  Tensor4 forward(const Tensor4& x, bool training);
  Tensor4 backward(const Tensor4& g_y) const;
  void clear_cache() noexcept {}
};

/// y = W x + b on (N, in, 1, 1) tensors; W is (out, in) row-major.
struct LinearLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::optional<Tensor4> saved_input;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;

  Tensor4 forward(const Tensor4& x, bool training);
  std::optional<Tensor4> backward(const Tensor4& g_y, bool need_input_grad);
  void clear_cache() noexcept { saved_input.reset(); }
};

using Layer = std::variant<ConvLayer, ReluLayer, AvgPool2Layer, FlattenLayer, LinearLayer>;

}  // namespace gradfilter
