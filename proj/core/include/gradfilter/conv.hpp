#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gradfilter/tensor.hpp"

namespace gradfilter {

/// Stride-1 convolution with symmetric zero padding.
struct ConvCfg {
  std::size_t padding = 0;
  std::size_t stride = 1;

  /// Throws ConfigError unless stride == 1.
  void validate() const;
};

/// Scalar operations executed by an instrumented kernel.
struct OpCount {
  std::uint64_t multiplies = 0;
  std::uint64_t additions = 0;

  OpCount& operator+=(const OpCount& o) noexcept {
    multiplies += o.multiplies;
    additions += o.additions;
    return *this;
  }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

/// Output spatial extent of a stride-1 convolution; throws ShapeError if the
/// padded input is smaller than the kernel.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t padding);

/// Input spatial extent that produced `output` under the same convolution.
std::size_t conv_input_extent(std::size_t output, std::size_t kernel, std::size_t padding);

Tensor4 conv2d_forward(const Tensor4& x, const Kernel4& weights, std::span<const double> bias,
                       const ConvCfg& cfg);

/// g_x: g_y scattered through the kernel, i.e. full correlation of g_y with
/// rot180(weights), cropped back to the unpadded input extent.
Tensor4 conv2d_backward_input(const Tensor4& g_y, const Kernel4& weights, const ConvCfg& cfg);

/// g_theta[o,i,u,v] = sum_{n,h,w} x_pad[n,i,h+u,w+v] * g_y[n,o,h,w].
Kernel4 conv2d_backward_kernel(const Tensor4& g_y, const Tensor4& x, const ConvCfg& cfg);

std::vector<double> conv2d_backward_bias(const Tensor4& g_y);

/// Same result as conv2d_backward_input plus the exact number of scalar
/// multiplies and adds the dense loop performed. Taps that land in the
/// padding are counted, so multiplies == N*C_x*C_y*H_y*W_y*H_k*W_k.
std::pair<Tensor4, OpCount> counted_backward_input(const Tensor4& g_y, const Kernel4& weights,
                                                   const ConvCfg& cfg);

}  // namespace gradfilter
