#include "gradfilter/filter.hpp"

#include <algorithm>
#include <cstddef>
#include <string>

namespace gradfilter {

void FilterCfg::validate() const {
  if (r < 1) throw ConfigError("filter: patch size r must be >= 1");
}

std::size_t PatchGrid::cardinality(std::size_t ph, std::size_t pw) const noexcept {
  const std::size_t h = std::min(r, origin_h - ph * r);
  const std::size_t w = std::min(r, origin_w - pw * r);
  return h * w;
}

namespace {

// floor((from - to) / 2): shift that centres a `to`-sized window on a
// `from`-sized axis.
std::ptrdiff_t centre_offset(std::size_t from, std::size_t to) {
  const auto d = static_cast<std::ptrdiff_t>(from) - static_cast<std::ptrdiff_t>(to);
  return d >= 0 ? d / 2 : -((-d + 1) / 2);
}

PatchGrid make_grid(const Shape4& map, std::size_t r) {
  return PatchGrid{Array4<PatchTag>({map.d0, map.d1, patch_count(map.d2, r), patch_count(map.d3, r)}),
                   map.d2, map.d3, r};
}

// Sums every patch of `t` into `grid` (values must start at zero).
void accumulate_patches(const Tensor4& t, PatchGrid& grid) {
  const Shape4& s = t.shape();
  const std::size_t r = grid.r;
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (std::size_t h = 0; h < s.d2; ++h) {
        for (std::size_t w = 0; w < s.d3; ++w) grid.values(n, c, h / r, w / r) += t(n, c, h, w);
      }
    }
  }
}

// Projects a map row/col onto the grid it was filtered on.
std::size_t grid_index(std::size_t pos, std::ptrdiff_t offset, std::size_t origin, std::size_t r) {
  const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(pos) - offset;
  const std::ptrdiff_t clamped =
      std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(origin) - 1);
  return static_cast<std::size_t>(clamped) / r;
}

void check_filtered_input(const PatchGrid& g_grid, const SpatialKernelSum& ks,
                          const Shape4& out_shape) {
  if (g_grid.channels() != ks.c_out) {
    throw ShapeError("filtered_backward_input: gradient grid has " +
                     std::to_string(g_grid.channels()) + " channels, kernel C_out is " +
                     std::to_string(ks.c_out));
  }
  if (out_shape.d0 != g_grid.batch() || out_shape.d1 != ks.c_in) {
    throw ShapeError("filtered_backward_input: output shape " + to_string(out_shape) +
                     " inconsistent with grid batch " + std::to_string(g_grid.batch()) +
                     " and kernel C_in " + std::to_string(ks.c_in));
  }
}

template <class OnMulAdd>
Tensor4 filtered_input_impl(const PatchGrid& g_grid, const SpatialKernelSum& ks,
                            const Shape4& out_shape, OnMulAdd&& tally) {
  check_filtered_input(g_grid, ks, out_shape);
  const std::size_t batch = g_grid.batch();
  const std::size_t rows = g_grid.rows();
  const std::size_t cols = g_grid.cols();

  // Unique values first: one channel mix per patch.
  Array4<PatchTag> unique({batch, ks.c_in, rows, cols});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t ci = 0; ci < ks.c_in; ++ci) {
      for (std::size_t ph = 0; ph < rows; ++ph) {
        for (std::size_t pw = 0; pw < cols; ++pw) {
          double acc = ks(0, ci) * g_grid.values(n, 0, ph, pw);
          for (std::size_t co = 1; co < ks.c_out; ++co) {
            acc += ks(co, ci) * g_grid.values(n, co, ph, pw);
          }
          unique(n, ci, ph, pw) = acc;
          tally(ks.c_out);
        }
      }
    }
  }

  const std::ptrdiff_t off_h = centre_offset(out_shape.d2, g_grid.origin_h);
  const std::ptrdiff_t off_w = centre_offset(out_shape.d3, g_grid.origin_w);
  std::vector<std::size_t> col_patch(out_shape.d3);
  for (std::size_t w = 0; w < out_shape.d3; ++w) {
    col_patch[w] = grid_index(w, off_w, g_grid.origin_w, g_grid.r);
  }

  Tensor4 g_x(out_shape);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t ci = 0; ci < ks.c_in; ++ci) {
      for (std::size_t h = 0; h < out_shape.d2; ++h) {
        const std::size_t ph = grid_index(h, off_h, g_grid.origin_h, g_grid.r);
        for (std::size_t w = 0; w < out_shape.d3; ++w) {
          g_x(n, ci, h, w) = unique(n, ci, ph, col_patch[w]);
        }
      }
    }
  }
  return g_x;
}

}  // namespace

PatchGrid filter_gradient(const Tensor4& g_y, const FilterCfg& cfg) {
  cfg.validate();
  PatchGrid grid = make_grid(g_y.shape(), cfg.r);
  accumulate_patches(g_y, grid);
  const double full = static_cast<double>(cfg.r * cfg.r);
  for (std::size_t n = 0; n < grid.batch(); ++n) {
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      for (std::size_t ph = 0; ph < grid.rows(); ++ph) {
        for (std::size_t pw = 0; pw < grid.cols(); ++pw) {
          const double divisor = cfg.partial == PartialPatchMode::true_mean
                                     ? static_cast<double>(grid.cardinality(ph, pw))
                                     : full;
          grid.values(n, c, ph, pw) /= divisor;
        }
      }
    }
  }
  return grid;
}

Tensor4 expand(const PatchGrid& grid) {
  Tensor4 out({grid.batch(), grid.channels(), grid.origin_h, grid.origin_w});
  const std::size_t r = grid.r;
  for (std::size_t n = 0; n < grid.batch(); ++n) {
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      for (std::size_t h = 0; h < grid.origin_h; ++h) {
        for (std::size_t w = 0; w < grid.origin_w; ++w) out(n, c, h, w) = grid.values(n, c, h / r, w / r);
      }
    }
  }
  return out;
}

SpatialKernelSum spatial_sum_kernel(const Kernel4& weights) {
  const Shape4& s = weights.shape();
  SpatialKernelSum ks{s.d0, s.d1, std::vector<double>(s.d0 * s.d1, 0.0)};
  for (std::size_t o = 0; o < s.d0; ++o) {
    for (std::size_t i = 0; i < s.d1; ++i) {
      double acc = 0.0;
      for (double t : weights.plane(o, i)) acc += t;
      ks.values[o * s.d1 + i] = acc;
    }
  }
  return ks;
}

PatchGrid patch_sum_input(const Tensor4& x, const FilterCfg& cfg) {
  cfg.validate();
  PatchGrid grid = make_grid(x.shape(), cfg.r);
  accumulate_patches(x, grid);
  return grid;
}

Tensor4 align_to_output(const Tensor4& x, std::size_t h_y, std::size_t w_y) {
  const Shape4& s = x.shape();
  if (s.d2 == h_y && s.d3 == w_y) return x;
  const std::ptrdiff_t off_h = centre_offset(s.d2, h_y);
  const std::ptrdiff_t off_w = centre_offset(s.d3, w_y);
  Tensor4 out({s.d0, s.d1, h_y, w_y});
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (std::size_t h = 0; h < h_y; ++h) {
        const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h) + off_h;
        if (sh < 0 || sh >= static_cast<std::ptrdiff_t>(s.d2)) continue;
        for (std::size_t w = 0; w < w_y; ++w) {
          const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w) + off_w;
          if (sw < 0 || sw >= static_cast<std::ptrdiff_t>(s.d3)) continue;
          out(n, c, h, w) = x(n, c, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw));
        }
      }
    }
  }
  return out;
}

Tensor4 filtered_backward_input(const PatchGrid& g_grid, const SpatialKernelSum& ks,
                                const Shape4& out_shape) {
  return filtered_input_impl(g_grid, ks, out_shape, [](std::size_t) {});
}

std::pair<Tensor4, OpCount> counted_filtered_backward_input(const PatchGrid& g_grid,
                                                            const SpatialKernelSum& ks,
                                                            const Shape4& out_shape) {
  OpCount count;
  Tensor4 g_x = filtered_input_impl(g_grid, ks, out_shape, [&count](std::size_t terms) {
    count.multiplies += terms;
    count.additions += terms - 1;
  });
  return {std::move(g_x), count};
}

Kernel4 filtered_backward_kernel(const PatchGrid& g_grid, const PatchGrid& x_grid,
                                 const Shape4& kernel_shape) {
  if (g_grid.batch() != x_grid.batch() || g_grid.rows() != x_grid.rows() ||
      g_grid.cols() != x_grid.cols() || g_grid.r != x_grid.r) {
    throw ShapeError("filtered_backward_kernel: gradient grid " + to_string(g_grid.values.shape()) +
                     " and input grid " + to_string(x_grid.values.shape()) +
                     " must share batch, patch layout and r");
  }
  if (g_grid.channels() != kernel_shape.d0 || x_grid.channels() != kernel_shape.d1) {
    throw ShapeError("filtered_backward_kernel: kernel shape " + to_string(kernel_shape) +
                     " does not match grid channels");
  }
  Kernel4 g_k(kernel_shape);
  for (std::size_t co = 0; co < kernel_shape.d0; ++co) {
    for (std::size_t ci = 0; ci < kernel_shape.d1; ++ci) {
      double acc = 0.0;
      for (std::size_t n = 0; n < g_grid.batch(); ++n) {
        acc += frobenius_inner(x_grid.values.plane(n, ci), g_grid.values.plane(n, co));
      }
      for (double& tap : g_k.plane(co, ci)) tap = acc;
    }
  }
  return g_k;
}

std::vector<double> filtered_backward_bias(const PatchGrid& g_grid) {
  std::vector<double> g_b(g_grid.channels(), 0.0);
  for (std::size_t n = 0; n < g_grid.batch(); ++n) {
    for (std::size_t c = 0; c < g_grid.channels(); ++c) {
      for (std::size_t ph = 0; ph < g_grid.rows(); ++ph) {
        for (std::size_t pw = 0; pw < g_grid.cols(); ++pw) {
          g_b[c] += g_grid.values(n, c, ph, pw) * static_cast<double>(g_grid.cardinality(ph, pw));
        }
      }
    }
  }
  return g_b;
}

FilteredGrads filtered_conv_bp(const PatchGrid& x_grid, const Shape4& input_shape,
                               const Kernel4& weights, const Tensor4& g_y, const FilterCfg& cfg) {
  if (weights.shape().d0 != g_y.shape().d1 || weights.shape().d1 != input_shape.d1) {
    throw ShapeError("filtered_conv_bp: kernel " + to_string(weights.shape()) +
                     " inconsistent with g_y " + to_string(g_y.shape()) + " / input " +
                     to_string(input_shape));
  }
  PatchGrid g_grid = filter_gradient(g_y, cfg);
  const SpatialKernelSum ks = spatial_sum_kernel(weights);
  FilteredGrads out;
  out.g_x = filtered_backward_input(g_grid, ks, input_shape);
  out.g_k = filtered_backward_kernel(g_grid, x_grid, weights.shape());
  out.g_b = filtered_backward_bias(g_grid);
  return out;
}

FilteredGrads filtered_conv_bp(const Tensor4& x, const Kernel4& weights, const Tensor4& g_y,
                               const FilterCfg& cfg) {
  const PatchGrid x_grid =
      patch_sum_input(align_to_output(x, g_y.shape().d2, g_y.shape().d3), cfg);
  return filtered_conv_bp(x_grid, x.shape(), weights, g_y, cfg);
}

}  // namespace gradfilter
