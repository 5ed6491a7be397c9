#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gradfilter {

/// Symbolic shape of one convolution layer for FLOP and memory accounting.
struct LayerCfg {
  std::uint64_t c_x = 1;  ///< input channels
  std::uint64_t c_y = 1;  ///< output channels
  std::uint64_t h_y = 1;
  std::uint64_t w_y = 1;
  std::uint64_t h_k = 1;
  std::uint64_t w_k = 1;
  std::uint64_t h_x = 1;
  std::uint64_t w_x = 1;

  /// Same-resolution layer (H_x == H_y), as in the U-Net example layer.
  static LayerCfg same(std::uint64_t c_x, std::uint64_t c_y, std::uint64_t h, std::uint64_t w,
                       std::uint64_t k_h, std::uint64_t k_w) {
    return {c_x, c_y, h, w, k_h, k_w, h, w};
  }

  void validate() const;
};

/// The residual the leading term leaves out, itemised.
struct OverheadTerms {
  std::uint64_t kernel_sum_adds = 0;       ///< C_x C_y (H_k W_k - 1)
  std::uint64_t filter_adds = 0;           ///< C_y H_y W_y
  std::uint64_t filter_multiplies = 0;     ///< ceil(H_y/r) ceil(W_y/r) C_y
  std::uint64_t input_patch_sum_adds = 0;  ///< C_x H_x W_x

  [[nodiscard]] std::uint64_t total() const noexcept {
    return kernel_sum_adds + filter_adds + filter_multiplies + input_patch_sum_adds;
  }
};

struct CostReport {
  std::uint64_t r = 1;
  std::uint64_t flops = 0;         ///< leading_term + overhead.total()
  std::uint64_t leading_term = 0;  ///< ceil(H_y/r) ceil(W_y/r) C_x (2 C_y - 1)
  OverheadTerms overhead;
  std::uint64_t stored_activation_elements = 0;  ///< per sample
  double memory_saving_fraction = 0.0;
  double fwd_overhead_ratio = 0.0;  ///< 1 / (2 C_y W_k H_k)
  double bwd_overhead_ratio = 0.0;  ///< (r^2 - 1) / (2 C_x)
};

struct MemoryReport {
  std::uint64_t stored_elements = 0;
  double saving_fraction = 0.0;
};

/// 2 C_x C_y W_y H_y W_k H_k: multiply-add count of exact g_x propagation.
std::uint64_t vanilla_bp_flops(const LayerCfg& cfg);

CostReport filtered_bp_flops(const LayerCfg& cfg, std::uint64_t r);

/// 2 C_x C_y - C_x: the leading term once one patch covers the whole map.
std::uint64_t min_flops(const LayerCfg& cfg);

/// Activation elements kept for the kernel gradient when only per-patch
/// sums of x are stored, against the N C_x H_x W_x a vanilla layer keeps.
MemoryReport memory_report(const LayerCfg& cfg, std::uint64_t r, std::uint64_t batch);

std::vector<CostReport> sweep_curve(const LayerCfg& cfg, std::span<const std::uint64_t> r_values);

}  // namespace gradfilter
