#include "gradfilter/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gradfilter/errors.hpp"

namespace gradfilter {

LossResult cross_entropy(const Tensor4& logits, std::span<const std::size_t> labels) {
  const Shape4& s = logits.shape();
  const std::size_t k = s.d1 * s.d2 * s.d3;
  if (labels.size() != s.d0) {
    throw ShapeError("cross_entropy: " + std::to_string(s.d0) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  LossResult out{0.0, Tensor4(s)};
  const auto z = logits.values();
  auto g = out.grad.values();
  const double inv_n = 1.0 / static_cast<double>(s.d0);
  for (std::size_t n = 0; n < s.d0; ++n) {
    if (labels[n] >= k) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[n]) + " out of range for " +
                       std::to_string(k) + " classes");
    }
    const auto row = z.subspan(n * k, k);
    const double m = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - m);
    const double log_denom = std::log(denom);
    out.loss += (log_denom - (row[labels[n]] - m)) * inv_n;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(row[c] - m - log_denom);
      g[n * k + c] = (p - (c == labels[n] ? 1.0 : 0.0)) * inv_n;
    }
  }
  return out;
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr,
                 std::size_t warmup_steps) {
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return base_lr;
  const double progress = static_cast<double>(std::min(step, total_steps) - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_l2_norm(std::span<const ParamRef> params) {
  double acc = 0.0;
  for (const ParamRef& p : params) {
    for (double g : p.grad) acc += g * g;
  }
  return std::sqrt(acc);
}

double clip_grad_l2(std::span<const ParamRef> params, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("clip_grad_l2: threshold must be > 0");
  const double norm = global_l2_norm(params);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (const ParamRef& p : params) {
      for (double& g : p.grad) g *= scale;
    }
  }
  return norm;
}

void sgd_step(std::span<const ParamRef> params, double lr, double momentum, double weight_decay,
              SgdState& state) {
  if (state.buffers.empty()) {
    state.buffers.reserve(params.size());
    for (const ParamRef& p : params) state.buffers.emplace_back(p.value.size(), 0.0);
  }
  if (state.buffers.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer state tracks " + std::to_string(state.buffers.size()) +
                     " blobs, got " + std::to_string(params.size()));
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    const ParamRef& p = params[b];
    auto& buf = state.buffers[b];
    if (p.grad.size() != p.value.size() || buf.size() != p.value.size()) {
      throw ShapeError("sgd_step: parameter/gradient size mismatch in blob " + std::to_string(b));
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      buf[i] = momentum * buf[i] + p.grad[i] + weight_decay * p.value[i];
      p.value[i] -= lr * buf[i];
    }
  }
}

}  // namespace gradfilter
