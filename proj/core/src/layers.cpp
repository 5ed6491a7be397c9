#include "gradfilter/layers.hpp"

#include <string>

namespace gradfilter {

const char* to_string(ConvMode::Kind kind) {
  switch (kind) {
    case ConvMode::Kind::frozen: return "frozen";
    case ConvMode::Kind::vanilla: return "vanilla";
    case ConvMode::Kind::filtered: return "filtered";
  }
  return "?";
}

Tensor4 ConvLayer::forward(const Tensor4& x, bool training) {
  Tensor4 y = conv2d_forward(x, weights, bias, cfg);
  clear_cache();
  if (!training) return y;
  batch_input_shape = x.shape();
  switch (mode.kind) {
    case ConvMode::Kind::vanilla:
      saved_input = x;
      break;
    case ConvMode::Kind::filtered:
      saved_patches = patch_sum_input(align_to_output(x, y.shape().d2, y.shape().d3),
                                      FilterCfg{mode.r, partial});
      break;
    case ConvMode::Kind::frozen:
      break;
  }
  return y;
}

std::optional<Tensor4> ConvLayer::backward(const Tensor4& g_y, bool need_input_grad) {
  switch (mode.kind) {
    case ConvMode::Kind::vanilla: {
      if (!saved_input) throw ShapeError("ConvLayer::backward: no saved input");
      grad_weights = conv2d_backward_kernel(g_y, *saved_input, cfg);
      grad_bias = conv2d_backward_bias(g_y);
      break;
    }
    case ConvMode::Kind::filtered: {
      if (!saved_patches) throw ShapeError("ConvLayer::backward: no saved patch sums");
      FilteredGrads g =
          filtered_conv_bp(*saved_patches, batch_input_shape, weights, g_y, FilterCfg{mode.r, partial});
      grad_weights = std::move(g.g_k);
      grad_bias = std::move(g.g_b);
      if (need_input_grad) return std::move(g.g_x);
      return std::nullopt;
    }
    case ConvMode::Kind::frozen:
      break;
  }
  if (!need_input_grad) return std::nullopt;
  return conv2d_backward_input(g_y, weights, cfg);
}

std::size_t ConvLayer::stored_activation_elements() const noexcept {
  if (saved_input) return saved_input->size();
  if (saved_patches) return saved_patches->unique_count();
  return 0;
}

void ConvLayer::clear_cache() noexcept {
  saved_input.reset();
  saved_patches.reset();
}

Tensor4 ReluLayer::forward(const Tensor4& x, bool training) {
  Tensor4 y = x;
  if (training) active.assign(x.size(), false);
  auto v = y.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) {
      if (training) active[i] = true;
    } else {
      v[i] = 0.0;
    }
  }
  return y;
}

Tensor4 ReluLayer::backward(const Tensor4& g_y) const {
  if (active.size() != g_y.size()) throw ShapeError("ReluLayer::backward: no saved mask");
  Tensor4 g_x = g_y;
  auto v = g_x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!active[i]) v[i] = 0.0;
  }
  return g_x;
}

Tensor4 AvgPool2Layer::forward(const Tensor4& x, bool training) {
  const Shape4& s = x.shape();
  if (s.d2 < 2 || s.d3 < 2) throw ShapeError("AvgPool2Layer: input smaller than 2x2");
  if (training) batch_input_shape = s;
  Tensor4 y({s.d0, s.d1, s.d2 / 2, s.d3 / 2});
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (std::size_t h = 0; h < s.d2 / 2; ++h) {
        for (std::size_t w = 0; w < s.d3 / 2; ++w) {
          y(n, c, h, w) = 0.25 * (x(n, c, 2 * h, 2 * w) + x(n, c, 2 * h, 2 * w + 1) +
                                  x(n, c, 2 * h + 1, 2 * w) + x(n, c, 2 * h + 1, 2 * w + 1));
        }
      }
    }
  }
  return y;
}

Tensor4 AvgPool2Layer::backward(const Tensor4& g_y) const {
  const Shape4& s = batch_input_shape;
  Tensor4 g_x(s);
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (std::size_t h = 0; h < s.d2 / 2; ++h) {
        for (std::size_t w = 0; w < s.d3 / 2; ++w) {
          const double g = 0.25 * g_y(n, c, h, w);
          g_x(n, c, 2 * h, 2 * w) = g;
          g_x(n, c, 2 * h, 2 * w + 1) = g;
          g_x(n, c, 2 * h + 1, 2 * w) = g;
          g_x(n, c, 2 * h + 1, 2 * w + 1) = g;
        }
      }
    }
  }
  return g_x;
}

Tensor4 FlattenLayer::forward(const Tensor4& x, bool training) {
  const Shape4& s = x.shape();
  if (training) batch_input_shape = s;
  return Tensor4({s.d0, s.d1 * s.d2 * s.d3, 1, 1}, x.raw());
}

Tensor4 FlattenLayer::backward(const Tensor4& g_y) const {
  return Tensor4(batch_input_shape, g_y.raw());
}

Tensor4 LinearLayer::forward(const Tensor4& x, bool training) {
  const Shape4& s = x.shape();
  if (s.d1 * s.d2 * s.d3 != in_features) {
    throw ShapeError("LinearLayer: expected " + std::to_string(in_features) +
                     " features, got " + to_string(s));
  }
  Tensor4 y({s.d0, out_features, 1, 1});
  const auto in = x.values();
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t o = 0; o < out_features; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in_features; ++i) {
        acc += weights[o * in_features + i] * in[n * in_features + i];
      }
      y(n, o, 0, 0) = acc;
    }
  }
  if (training) {
    saved_input = x;
  } else {
    saved_input.reset();
  }
  return y;
}

std::optional<Tensor4> LinearLayer::backward(const Tensor4& g_y, bool need_input_grad) {
  if (!saved_input) throw ShapeError("LinearLayer::backward: no saved input");
  const std::size_t batch = g_y.shape().d0;
  const auto in = saved_input->values();
  const auto g = g_y.values();
  grad_weights.assign(weights.size(), 0.0);
  grad_bias.assign(bias.size(), 0.0);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_features; ++o) {
      const double go = g[n * out_features + o];
      grad_bias[o] += go;
      for (std::size_t i = 0; i < in_features; ++i) {
        grad_weights[o * in_features + i] += go * in[n * in_features + i];
      }
    }
  }
  if (!need_input_grad) return std::nullopt;
  Tensor4 g_x(saved_input->shape());
  auto gx = g_x.values();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_features; ++o) {
      const double go = g[n * out_features + o];
      for (std::size_t i = 0; i < in_features; ++i) {
        gx[n * in_features + i] += go * weights[o * in_features + i];
      }
    }
  }
  return g_x;
}

}  // namespace gradfilter
