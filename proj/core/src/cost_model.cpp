#include "gradfilter/cost_model.hpp"

#include "gradfilter/errors.hpp"

namespace gradfilter {

namespace {

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) noexcept {
  return (a + b - 1) / b;
}

}  // namespace

void LayerCfg::validate() const {
  if (c_x == 0 || c_y == 0 || h_y == 0 || w_y == 0 || h_k == 0 || w_k == 0 || h_x == 0 ||
      w_x == 0) {
    throw ConfigError("LayerCfg: all dimensions must be >= 1");
  }
}

std::uint64_t vanilla_bp_flops(const LayerCfg& cfg) {
  cfg.validate();
  return 2 * cfg.c_x * cfg.c_y * cfg.w_y * cfg.h_y * cfg.w_k * cfg.h_k;
}

std::uint64_t min_flops(const LayerCfg& cfg) {
  cfg.validate();
  return 2 * cfg.c_x * cfg.c_y - cfg.c_x;
}

MemoryReport memory_report(const LayerCfg& cfg, std::uint64_t r, std::uint64_t batch) {
  cfg.validate();
  if (r == 0) throw ConfigError("memory_report: r must be >= 1");
  MemoryReport m;
  m.stored_elements = batch * cfg.c_x * ceil_div(cfg.h_x, r) * ceil_div(cfg.w_x, r);
  const std::uint64_t dense = batch * cfg.c_x * cfg.h_x * cfg.w_x;
  m.saving_fraction =
      dense == 0 ? 0.0
                 : 1.0 - static_cast<double>(m.stored_elements) / static_cast<double>(dense);
  return m;
}

CostReport filtered_bp_flops(const LayerCfg& cfg, std::uint64_t r) {
  cfg.validate();
  if (r == 0) throw ConfigError("filtered_bp_flops: r must be >= 1");
  const std::uint64_t patches = ceil_div(cfg.h_y, r) * ceil_div(cfg.w_y, r);

  CostReport rep;
  rep.r = r;
  rep.leading_term = patches * cfg.c_x * (2 * cfg.c_y - 1);
  rep.overhead.kernel_sum_adds = cfg.c_x * cfg.c_y * (cfg.h_k * cfg.w_k - 1);
  rep.overhead.filter_adds = cfg.c_y * cfg.h_y * cfg.w_y;
  rep.overhead.filter_multiplies = patches * cfg.c_y;
  rep.overhead.input_patch_sum_adds = cfg.c_x * cfg.h_x * cfg.w_x;
  rep.flops = rep.leading_term + rep.overhead.total();

  const MemoryReport mem = memory_report(cfg, r, 1);
  rep.stored_activation_elements = mem.stored_elements;
  rep.memory_saving_fraction = mem.saving_fraction;
  rep.fwd_overhead_ratio = 1.0 / static_cast<double>(2 * cfg.c_y * cfg.w_k * cfg.h_k);
  rep.bwd_overhead_ratio = static_cast<double>(r * r - 1) / static_cast<double>(2 * cfg.c_x);
  return rep;
}

std::vector<CostReport> sweep_curve(const LayerCfg& cfg, std::span<const std::uint64_t> r_values) {
  std::vector<CostReport> curve;
  curve.reserve(r_values.size());
  for (std::uint64_t r : r_values) curve.push_back(filtered_bp_flops(cfg, r));
  return curve;
}

}  // namespace gradfilter
