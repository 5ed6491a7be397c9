#include <gtest/gtest.h>

#include "gradfilter/conv.hpp"
#include "gradfilter/cost_model.hpp"
#include "gradfilter/errors.hpp"
#include "gradfilter/filter.hpp"
#include "oracles.hpp"

using namespace gradfilter;

namespace {

Tensor4 iota16() {
  Tensor4 t({1, 1, 4, 4});
  double k = 1.0;
  for (double& v : t.values()) v = k++;
  return t;
}

Tensor4 filled(Shape4 s, double v) {
  Tensor4 t(s);
  for (double& e : t.values()) e = v;
  return t;
}

std::vector<double> grid_values(const PatchGrid& g) { return g.values.raw(); }

}  // namespace

TEST(FilterGradient, ConstantStaysConstant) {
  for (std::size_t r : {1u, 2u, 3u, 5u}) {
    const PatchGrid g = filter_gradient(filled({2, 2, 5, 7}, 1.25), {r});
    for (double v : g.values.values()) EXPECT_DOUBLE_EQ(v, 1.25);
  }
}

TEST(FilterGradient, PatchMeansOfOneToSixteen) {
  EXPECT_EQ(grid_values(filter_gradient(iota16(), {2})), (std::vector<double>{3.5, 5.5, 11.5, 13.5}));
}

TEST(FilterGradient, RadiusOneIsIdentity) {
  Rng rng(1);
  const Tensor4 g = gftest::random_tensor({2, 3, 5, 4}, rng);
  const PatchGrid grid = filter_gradient(g, {1});
  EXPECT_EQ(grid.values.raw(), g.raw());
  EXPECT_EQ(expand(grid), g);
}

TEST(FilterGradient, RejectsZeroRadius) {
  EXPECT_THROW(filter_gradient(Tensor4({1, 1, 2, 2}), {0}), ConfigError);
}

TEST(FilterGradient, PartialPatchDivisor) {
  // 3x3 map, r = 2: the corner patch holds one element.
  const Tensor4 g = filled({1, 1, 3, 3}, 4.0);
  const PatchGrid mean = filter_gradient(g, {2, PartialPatchMode::true_mean});
  const PatchGrid strict = filter_gradient(g, {2, PartialPatchMode::strict_r2});
  EXPECT_EQ(grid_values(mean), (std::vector<double>{4, 4, 4, 4}));
  EXPECT_EQ(grid_values(strict), (std::vector<double>{4, 2, 2, 1}));
  EXPECT_EQ(mean.cardinality(1, 1), 1u);
  EXPECT_EQ(mean.cardinality(0, 1), 2u);
}

TEST(Expand, Examples) {
  PatchGrid single{Array4<PatchTag>({1, 1, 1, 1}, {2.5}), 2, 2, 2};
  EXPECT_EQ(expand(single).raw(), (std::vector<double>{2.5, 2.5, 2.5, 2.5}));
  const Tensor4 e = expand(filter_gradient(iota16(), {2}));
  EXPECT_EQ(e.raw(), (std::vector<double>{3.5, 3.5, 5.5, 5.5, 3.5, 3.5, 5.5, 5.5, 11.5, 11.5,
                                          13.5, 13.5, 11.5, 11.5, 13.5, 13.5}));
}

TEST(FilterGradient, IsProjection) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t r = gftest::between(rng, 1, 4);
    const Tensor4 g = gftest::random_tensor({2, 2, r * gftest::between(rng, 1, 3), r * gftest::between(rng, 1, 3)}, rng);
    const PatchGrid once = filter_gradient(g, {r});
    const PatchGrid twice = filter_gradient(expand(once), {r});
    EXPECT_LT(gftest::max_abs_diff(once.values.values(), twice.values.values()), 1e-12);
  }
}

TEST(FilterGradient, PreservesSumOnDivisibleMaps) {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    const std::size_t r = gftest::between(rng, 1, 4);
    const Tensor4 g = gftest::random_tensor({1, 3, r * 3, r * 2}, rng);
    double before = 0.0;
    double after = 0.0;
    for (double v : g.values()) before += v;
    const Tensor4 e = expand(filter_gradient(g, {r}));
    for (double v : e.values()) after += v;
    EXPECT_NEAR(after, before, 1e-9 * std::max(1.0, std::abs(before)));
  }
}

TEST(FilterGradient, UniqueElementCount) {
  for (std::size_t r : {1u, 2u, 3u, 4u, 7u}) {
    const PatchGrid g = filter_gradient(Tensor4({3, 2, 10, 9}), {r});
    EXPECT_EQ(g.unique_count(), 3 * 2 * patch_count(10, r) * patch_count(9, r));
  }
}

TEST(SpatialSumKernel, Examples) {
  EXPECT_EQ(spatial_sum_kernel(Kernel4({1, 1, 2, 2}, {1, 2, 3, 4})).values, (std::vector<double>{10}));
  EXPECT_EQ(spatial_sum_kernel(Kernel4({2, 3, 3, 3})).values, std::vector<double>(6, 0.0));
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Kernel4 k = gftest::random_kernel({3, 2, 3, 3}, rng);
    const auto a = spatial_sum_kernel(k).values;
    const auto b = spatial_sum_kernel(rot180(k)).values;
    EXPECT_LT(gftest::max_abs_diff(a, b), 1e-12);
  }
}

TEST(PatchSumInput, Examples) {
  EXPECT_EQ(grid_values(patch_sum_input(filled({1, 1, 4, 4}, 1.0), {2})), (std::vector<double>{4, 4, 4, 4}));
  EXPECT_EQ(grid_values(patch_sum_input(iota16(), {1})), iota16().raw());
  EXPECT_EQ(grid_values(patch_sum_input(iota16(), {2})), (std::vector<double>{14, 22, 46, 54}));
  // Never divided, whatever the partial mode.
  const Tensor4 x = filled({1, 1, 3, 3}, 1.0);
  EXPECT_EQ(grid_values(patch_sum_input(x, {2, PartialPatchMode::strict_r2})), (std::vector<double>{4, 2, 2, 1}));
  EXPECT_EQ(grid_values(patch_sum_input(x, {2, PartialPatchMode::true_mean})), (std::vector<double>{4, 2, 2, 1}));
}

TEST(FilteredBackwardInput, BlockMap) {
  const PatchGrid g = filter_gradient(iota16(), {2});
  const SpatialKernelSum ks{1, 1, {10.0}};
  const Tensor4 gx = filtered_backward_input(g, ks, {1, 1, 4, 4});
  EXPECT_EQ(gx.raw(), (std::vector<double>{35, 35, 55, 55, 35, 35, 55, 55, 115, 115, 135, 135,
                                           115, 115, 135, 135}));
  const Tensor4 zero = filtered_backward_input(g, SpatialKernelSum{1, 1, {0.0}}, {1, 1, 4, 4});
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(FilteredBackwardInput, ChannelMismatchThrows) {
  const PatchGrid g = filter_gradient(Tensor4({1, 2, 4, 4}), {2});
  EXPECT_THROW(filtered_backward_input(g, SpatialKernelSum{3, 1, std::vector<double>(3)}, {1, 1, 4, 4}), ShapeError);
  EXPECT_THROW(filtered_backward_input(g, SpatialKernelSum{2, 1, std::vector<double>(2)}, {1, 2, 4, 4}), ShapeError);
}

TEST(FilteredBackwardKernel, ConstantTapsFromOnesInput) {
  const PatchGrid g = filter_gradient(iota16(), {2});
  const PatchGrid x = patch_sum_input(filled({1, 1, 4, 4}, 1.0), {2});
  const Kernel4 gk = filtered_backward_kernel(g, x, {1, 1, 3, 3});
  for (double v : gk.values()) EXPECT_DOUBLE_EQ(v, 136.0);
  const PatchGrid zero = filter_gradient(Tensor4({1, 1, 4, 4}), {2});
  const Kernel4 gz = filtered_backward_kernel(zero, x, {1, 1, 3, 3});
  for (double v : gz.values()) EXPECT_EQ(v, 0.0);
}

TEST(FilteredBackwardKernel, GridMismatchThrows) {
  const PatchGrid g = filter_gradient(Tensor4({1, 1, 4, 4}), {2});
  const PatchGrid x = patch_sum_input(Tensor4({1, 1, 6, 4}), {2});
  EXPECT_THROW(filtered_backward_kernel(g, x, {1, 1, 3, 3}), ShapeError);
  const PatchGrid x2 = patch_sum_input(Tensor4({1, 2, 4, 4}), {2});
  EXPECT_THROW(filtered_backward_kernel(g, x2, {1, 1, 3, 3}), ShapeError);
}

TEST(FilteredConvBp, CompositeExample) {
  const FilteredGrads out = filtered_conv_bp(filled({1, 1, 4, 4}, 1.0), Kernel4({1, 1, 3, 3}, std::vector<double>(9, 1.0)), iota16(), {2});
  for (double v : out.g_k.values()) EXPECT_DOUBLE_EQ(v, 136.0);
  EXPECT_DOUBLE_EQ(out.g_b[0], 136.0);
  EXPECT_DOUBLE_EQ(out.g_x(0, 0, 0, 0), 9 * 3.5);
  EXPECT_DOUBLE_EQ(out.g_x(0, 0, 3, 3), 9 * 13.5);
}

TEST(FilteredConvBp, ZeroGradientGivesZeros) {
  Rng rng(7);
  const FilteredGrads out = filtered_conv_bp(gftest::random_tensor({2, 2, 6, 6}, rng),
                                             gftest::random_kernel({3, 2, 3, 3}, rng),
                                             Tensor4({2, 3, 6, 6}), {2});
  for (double v : out.g_x.values()) EXPECT_EQ(v, 0.0);
  for (double v : out.g_k.values()) EXPECT_EQ(v, 0.0);
  for (double v : out.g_b) EXPECT_EQ(v, 0.0);
}

TEST(FilteredConvBp, CollapsesToVanillaForPointKernels) {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const Shape4 xs{gftest::between(rng, 1, 3), gftest::between(rng, 1, 4), gftest::between(rng, 1, 6),
                    gftest::between(rng, 1, 6)};
    const Tensor4 x = gftest::random_tensor(xs, rng);
    const Kernel4 w = gftest::random_kernel({gftest::between(rng, 1, 4), xs.d1, 1, 1}, rng);
    const Tensor4 g = gftest::random_tensor({xs.d0, w.shape().d0, xs.d2, xs.d3}, rng);
    const FilteredGrads f = filtered_conv_bp(x, w, g, {1});
    EXPECT_LT(gftest::rel_diff(conv2d_backward_input(g, w, {}).values(), f.g_x.values()), 1e-12);
    EXPECT_LT(gftest::rel_diff(conv2d_backward_kernel(g, x, {}).values(), f.g_k.values()), 1e-12);
    EXPECT_LT(gftest::rel_diff(conv2d_backward_bias(g), f.g_b), 1e-12);
  }
}

TEST(FilteredConvBp, MatchesNaiveLoops) {
  Rng rng(13);
  for (int t = 0; t < 40; ++t) {
    const std::size_t k = 2 * gftest::between(rng, 0, 2) + 1;
    const std::size_t r = gftest::between(rng, 1, 4);
    const bool strict = rng.below(2) == 1;
    const Shape4 xs{gftest::between(rng, 1, 2), gftest::between(rng, 1, 3), gftest::between(rng, k, 9),
                    gftest::between(rng, k, 9)};
    const Tensor4 x = gftest::random_tensor(xs, rng);
    const Kernel4 w = gftest::random_kernel({gftest::between(rng, 1, 3), xs.d1, k, k}, rng);
    const Tensor4 g = gftest::random_tensor({xs.d0, w.shape().d0, xs.d2, xs.d3}, rng);
    const FilterCfg cfg{r, strict ? PartialPatchMode::strict_r2 : PartialPatchMode::true_mean};
    const FilteredGrads f = filtered_conv_bp(x, w, g, cfg);
    const gftest::NaiveFiltered ref = gftest::naive_filtered_bp(x, w, g, r, strict);
    EXPECT_LT(gftest::rel_diff(ref.g_x.values(), f.g_x.values()), 1e-12);
    EXPECT_LT(gftest::rel_diff(ref.g_k.values(), f.g_k.values()), 1e-12);
    EXPECT_LT(gftest::rel_diff(ref.g_b, f.g_b), 1e-12);
    for (std::size_t o = 0; o < w.shape().d0; ++o)
      for (std::size_t i = 0; i < xs.d1; ++i)
        for (double tap : f.g_k.plane(o, i)) EXPECT_EQ(tap, f.g_k(o, i, 0, 0));
  }
}

TEST(FilteredConvBp, ConstantGradientMatchesVanillaInInterior) {
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    const Tensor4 x = gftest::random_tensor({1, 2, 8, 8}, rng);
    const Kernel4 w = gftest::random_kernel({3, 2, 3, 3}, rng);
    const Tensor4 g = filled({1, 3, 8, 8}, rng.uniform(-2, 2));
    const Tensor4 exact = conv2d_backward_input(g, w, {1});
    const FilteredGrads f = filtered_conv_bp(x, w, g, {gftest::between(rng, 1, 4)});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t h = 1; h < 7; ++h)
        for (std::size_t ww = 1; ww < 7; ++ww)
          EXPECT_NEAR(f.g_x(0, c, h, ww), exact(0, c, h, ww), 1e-9 * std::max(1.0, std::abs(exact(0, c, h, ww))));
  }
}

TEST(FilteredConvBp, ValidPaddingAlignsInputToOutputGrid) {
  Rng rng(15);
  const Tensor4 x = gftest::random_tensor({1, 1, 6, 6}, rng);
  const Kernel4 w = gftest::random_kernel({1, 1, 3, 3}, rng);
  const Tensor4 g = gftest::random_tensor({1, 1, 4, 4}, rng);
  const FilteredGrads f = filtered_conv_bp(x, w, g, {2});
  EXPECT_EQ(f.g_x.shape(), x.shape());
  // The stored patch grid covers the 4x4 window under the kernel centres.
  const PatchGrid xs = patch_sum_input(align_to_output(x, 4, 4), {2});
  EXPECT_NEAR(xs.values(0, 0, 0, 0), x(0, 0, 1, 1) + x(0, 0, 1, 2) + x(0, 0, 2, 1) + x(0, 0, 2, 2), 1e-12);
  // Border rows take the value of the nearest patch.
  EXPECT_EQ(f.g_x(0, 0, 0, 0), f.g_x(0, 0, 1, 1));
  EXPECT_EQ(f.g_x(0, 0, 5, 5), f.g_x(0, 0, 4, 4));
}

TEST(CountedFilteredBackwardInput, MatchesLeadingTermMultiplyShare) {
  Rng rng(16);
  for (int t = 0; t < 20; ++t) {
    const std::size_t r = gftest::between(rng, 1, 4);
    const LayerCfg cfg = LayerCfg::same(gftest::between(rng, 1, 4), gftest::between(rng, 1, 4),
                                        gftest::between(rng, 1, 9), gftest::between(rng, 1, 9), 3, 3);
    const Tensor4 g = gftest::random_tensor({1, cfg.c_y, cfg.h_y, cfg.w_y}, rng);
    const Kernel4 w = gftest::random_kernel({cfg.c_y, cfg.c_x, 3, 3}, rng);
    const auto [gx, ops] = counted_filtered_backward_input(filter_gradient(g, {r}), spatial_sum_kernel(w),
                                                           {1, cfg.c_x, cfg.h_y, cfg.w_y});
    const CostReport rep = filtered_bp_flops(cfg, r);
    EXPECT_EQ(ops.multiplies + ops.additions, rep.leading_term);
    EXPECT_EQ(ops.multiplies, patch_count(cfg.h_y, r) * patch_count(cfg.w_y, r) * cfg.c_x * cfg.c_y);
  }
}
