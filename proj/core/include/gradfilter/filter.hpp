#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gradfilter/conv.hpp"
#include "gradfilter/tensor.hpp"

namespace gradfilter {

/// Divisor used for patches cut short by the map edge. Full r x r patches
/// always divide by r^2.
enum class PartialPatchMode {
  strict_r2,  ///< always divide by r^2
  true_mean,  ///< divide by the number of elements actually inside the patch
};

struct FilterCfg {
  std::size_t r = 1;
  PartialPatchMode partial = PartialPatchMode::true_mean;

  void validate() const;
};

struct PatchTag {};

/// One value per r x r patch of an (N, C, H, W) map. `values` has shape
/// (N, C, ceil(H/r), ceil(W/r)); the expanded map is never materialised
/// unless expand() is called.
struct PatchGrid {
  Array4<PatchTag> values;
  std::size_t origin_h = 1;
  std::size_t origin_w = 1;
  std::size_t r = 1;

  [[nodiscard]] std::size_t batch() const noexcept { return values.shape().d0; }
  [[nodiscard]] std::size_t channels() const noexcept { return values.shape().d1; }
  [[nodiscard]] std::size_t rows() const noexcept { return values.shape().d2; }
  [[nodiscard]] std::size_t cols() const noexcept { return values.shape().d3; }
  [[nodiscard]] std::size_t unique_count() const noexcept { return values.size(); }

  /// Number of map elements covered by patch (ph, pw).
  [[nodiscard]] std::size_t cardinality(std::size_t ph, std::size_t pw) const noexcept;
};

/// ceil(extent / r)
constexpr std::size_t patch_count(std::size_t extent, std::size_t r) noexcept {
  return (extent + r - 1) / r;
}

/// Per-(c_out, c_in) sum of all kernel taps.
struct SpatialKernelSum {
  std::size_t c_out = 0;
  std::size_t c_in = 0;
  std::vector<double> values;

  [[nodiscard]] double operator()(std::size_t o, std::size_t i) const noexcept {
    return values[o * c_in + i];
  }
};

PatchGrid filter_gradient(const Tensor4& g_y, const FilterCfg& cfg);

Tensor4 expand(const PatchGrid& grid);

SpatialKernelSum spatial_sum_kernel(const Kernel4& weights);

/// Per-patch sums of x. Never divided, whatever the partial-patch mode.
PatchGrid patch_sum_input(const Tensor4& x, const FilterCfg& cfg);

/// Crops or zero-extends x to (h_y, w_y), centred, so each output pixel
/// lines up with the input pixel under the kernel centre. Identity when the
/// convolution preserves the spatial size.
Tensor4 align_to_output(const Tensor4& x, std::size_t h_y, std::size_t w_y);

/// g~_x[n,i,h,w] = sum_o ks[o,i] * g~_u[n,o,patch(h),patch(w)], with every
/// patch treated as extending indefinitely with its own value. `out_shape`
/// is (N, C_in, H_x, W_x); when H_x != H_y the rows are mapped through the
/// same centred alignment as align_to_output and clamped to the grid.
Tensor4 filtered_backward_input(const PatchGrid& g_grid, const SpatialKernelSum& ks,
                                const Shape4& out_shape);

/// As filtered_backward_input, also counting the multiplies and adds spent
/// on the unique grid (expansion is a copy and costs nothing).
std::pair<Tensor4, OpCount> counted_filtered_backward_input(const PatchGrid& g_grid,
                                                            const SpatialKernelSum& ks,
                                                            const Shape4& out_shape);

/// g~_theta[o,i,u,v] = sum_{n,patch} x~_u[n,i,patch] * g~_u[n,o,patch]; the
/// value is the same for every tap (u, v).
Kernel4 filtered_backward_kernel(const PatchGrid& g_grid, const PatchGrid& x_grid,
                                 const Shape4& kernel_shape);

/// Sum of the expanded filtered map per output channel.
std::vector<double> filtered_backward_bias(const PatchGrid& g_grid);

struct FilteredGrads {
  Tensor4 g_x;
  Kernel4 g_k;
  std::vector<double> g_b;
};

/// Full filtered backward pass from the stored patch sums of the aligned
/// input. This is what a training layer calls: it never needs x itself.
FilteredGrads filtered_conv_bp(const PatchGrid& x_grid, const Shape4& input_shape,
                               const Kernel4& weights, const Tensor4& g_y, const FilterCfg& cfg);

/// Convenience overload that builds the patch sums from x.
FilteredGrads filtered_conv_bp(const Tensor4& x, const Kernel4& weights, const Tensor4& g_y,
                               const FilterCfg& cfg);

}  // namespace gradfilter
