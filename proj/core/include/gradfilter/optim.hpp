#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gradfilter/layers.hpp"
#include "gradfilter/tensor.hpp"

namespace gradfilter {

struct LossResult {
  double loss = 0.0;
  Tensor4 grad;  ///< d(mean loss)/d(logits), same shape as the logits
};

/// Mean softmax cross-entropy over the batch. `logits` is (N, K, 1, 1).
/// Throws ShapeError when a label is >= K or the batch sizes differ.
LossResult cross_entropy(const Tensor4& logits, std::span<const std::size_t> labels);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

/// Linear warm-up from 0 to base_lr over warmup_steps, then cosine decay to
/// 0 at total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr,
                 std::size_t warmup_steps);

double global_l2_norm(std::span<const ParamRef> params);

/// Rescales every gradient by threshold / norm when the global L2 norm
/// exceeds threshold. Returns the norm before clipping.
double clip_grad_l2(std::span<const ParamRef> params, double threshold);

struct SgdState {
  std::vector<std::vector<double>> buffers;
};

/// buffer = momentum * buffer + grad + weight_decay * param; param -= lr * buffer.
void sgd_step(std::span<const ParamRef> params, double lr, double momentum, double weight_decay,
              SgdState& state);

}  // namespace gradfilter
