// Vanilla vs filtered backward pass of one conv layer, plus the full
// training step of the desk model.

#include <benchmark/benchmark.h>

#include "gradfilter/conv.hpp"
#include "gradfilter/cost_model.hpp"
#include "gradfilter/filter.hpp"
#include "gradfilter/model.hpp"
#include "gradfilter/optim.hpp"
#include "gradfilter/rng.hpp"

using namespace gradfilter;

namespace {

template <class A>
A random_array(const Shape4& s, std::uint64_t seed) {
  Rng rng(seed);
  A a(s);
  for (double& v : a.values()) v = rng.uniform(-1.0, 1.0);
  return a;
}

struct LayerData {
  Tensor4 x;
  Kernel4 w;
  Tensor4 g_y;
};

// args: channels in/out, spatial side
LayerData make_layer(const benchmark::State& st) {
  const auto c = static_cast<std::size_t>(st.range(0));
  const auto hw = static_cast<std::size_t>(st.range(1));
  return {random_array<Tensor4>({1, c, hw, hw}, 1), random_array<Kernel4>({c, c, 3, 3}, 2),
          random_array<Tensor4>({1, c, hw, hw}, 3)};
}

void report_flops(benchmark::State& st, std::uint64_t flops) {
  st.counters["analytic_flops"] = static_cast<double>(flops);
  st.counters["flop_rate"] = benchmark::Counter(static_cast<double>(flops) * st.iterations(),
                                                benchmark::Counter::kIsRate);
}

void BM_VanillaBackward(benchmark::State& st) {
  const LayerData d = make_layer(st);
  for (auto _ : st) {
    benchmark::DoNotOptimize(conv2d_backward_input(d.g_y, d.w, {1}));
    benchmark::DoNotOptimize(conv2d_backward_kernel(d.g_y, d.x, {1}));
  }
  const auto c = static_cast<std::uint64_t>(st.range(0));
  const auto hw = static_cast<std::uint64_t>(st.range(1));
  report_flops(st, vanilla_bp_flops(LayerCfg::same(c, c, hw, hw, 3, 3)));
}

void BM_FilteredBackward(benchmark::State& st) {
  const LayerData d = make_layer(st);
  const auto r = static_cast<std::size_t>(st.range(2));
  const PatchGrid x_grid = patch_sum_input(d.x, {r});
  for (auto _ : st) {
    benchmark::DoNotOptimize(filtered_conv_bp(x_grid, d.x.shape(), d.w, d.g_y, {r}));
  }
  const auto c = static_cast<std::uint64_t>(st.range(0));
  const auto hw = static_cast<std::uint64_t>(st.range(1));
  report_flops(st, filtered_bp_flops(LayerCfg::same(c, c, hw, hw, 3, 3), r).flops);
}

void BM_DeskTrainStep(benchmark::State& st) {
  Model m = make_desk_model(1, 16, 16, 10, 1);
  const auto r = static_cast<std::size_t>(st.range(0));
  m.set_active_layers(2, r == 0 ? ConvMode::vanilla() : ConvMode::filtered(r));
  const Tensor4 x = random_array<Tensor4>({32, 1, 16, 16}, 4);
  std::vector<std::size_t> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10;
  SgdState opt;
  for (auto _ : st) {
    const Tensor4 logits = m.forward(x, true);
    m.backward(cross_entropy(logits, labels).grad);
    const auto params = m.trainable_params();
    clip_grad_l2(params, 2.0);
    sgd_step(params, 1e-3, 0.9, 1e-4, opt);
    m.clear_caches();
  }
}

}  // namespace

BENCHMARK(BM_VanillaBackward)->Args({16, 32})->Args({32, 32})->Args({32, 64});
BENCHMARK(BM_FilteredBackward)
    ->Args({16, 32, 2})
    ->Args({32, 32, 2})
    ->Args({32, 32, 4})
    ->Args({32, 64, 4})
    ->Args({32, 64, 8});
// r = 0 is the vanilla step.
BENCHMARK(BM_DeskTrainStep)->Arg(0)->Arg(2)->Arg(4);
BENCHMARK_MAIN();
