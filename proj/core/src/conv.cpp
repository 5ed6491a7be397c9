#include "gradfilter/conv.hpp"

#include <string>

namespace gradfilter {

void ConvCfg::validate() const {
  if (stride != 1) {
    throw ConfigError("conv: only stride 1 is supported, got " + std::to_string(stride));
  }
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t padding) {
  const std::size_t padded = input + 2 * padding;
  if (padded < kernel) {
    throw ShapeError("conv: padded extent " + std::to_string(padded) + " smaller than kernel " +
                     std::to_string(kernel));
  }
  return padded - kernel + 1;
}

std::size_t conv_input_extent(std::size_t output, std::size_t kernel, std::size_t padding) {
  const std::size_t padded = output + kernel - 1;
  if (padded <= 2 * padding) {
    throw ShapeError("conv: padding " + std::to_string(padding) + " too large for output extent " +
                     std::to_string(output));
  }
  return padded - 2 * padding;
}

Tensor4 conv2d_forward(const Tensor4& x, const Kernel4& weights, std::span<const double> bias,
                       const ConvCfg& cfg) {
  cfg.validate();
  const Shape4& xs = x.shape();
  const Shape4& ks = weights.shape();
  if (ks.d1 != xs.d1) {
    throw ShapeError("conv2d_forward: kernel expects " + std::to_string(ks.d1) +
                     " input channels, x has " + std::to_string(xs.d1));
  }
  if (bias.size() != ks.d0) {
    throw ShapeError("conv2d_forward: bias length " + std::to_string(bias.size()) +
                     " != C_out " + std::to_string(ks.d0));
  }
  const std::size_t p = cfg.padding;
  const std::size_t ho = conv_output_extent(xs.d2, ks.d2, p);
  const std::size_t wo = conv_output_extent(xs.d3, ks.d3, p);
  Tensor4 y({xs.d0, ks.d0, ho, wo});

  for (std::size_t n = 0; n < xs.d0; ++n) {
    for (std::size_t co = 0; co < ks.d0; ++co) {
      for (std::size_t h = 0; h < ho; ++h) {
        for (std::size_t w = 0; w < wo; ++w) {
          double acc = bias[co];
          for (std::size_t ci = 0; ci < ks.d1; ++ci) {
            for (std::size_t u = 0; u < ks.d2; ++u) {
              const std::size_t hp = h + u;
              if (hp < p || hp - p >= xs.d2) continue;
              for (std::size_t v = 0; v < ks.d3; ++v) {
                const std::size_t wp = w + v;
                if (wp < p || wp - p >= xs.d3) continue;
                acc += x(n, ci, hp - p, wp - p) * weights(co, ci, u, v);
              }
            }
          }
          y(n, co, h, w) = acc;
        }
      }
    }
  }
  return y;
}

namespace {

struct NoCount {
  void mul_add() noexcept {}
};

struct Tally {
  OpCount count;
  void mul_add() noexcept {
    ++count.multiplies;
    ++count.additions;
  }
};

// Scatter form over a padded accumulator: every g_y element is multiplied by
// every tap, padding included. The crop at the end discards the halo.
template <class Counter>
Tensor4 backward_input_loop(const Tensor4& g_y, const Kernel4& weights, const ConvCfg& cfg,
                            Counter& counter) {
  cfg.validate();
  const Shape4& gs = g_y.shape();
  const Shape4& ks = weights.shape();
  if (gs.d1 != ks.d0) {
    throw ShapeError("conv2d_backward_input: g_y has " + std::to_string(gs.d1) +
                     " channels, kernel C_out is " + std::to_string(ks.d0));
  }
  const std::size_t p = cfg.padding;
  const std::size_t hx = conv_input_extent(gs.d2, ks.d2, p);
  const std::size_t wx = conv_input_extent(gs.d3, ks.d3, p);
  const std::size_t hp = hx + 2 * p;
  const std::size_t wp = wx + 2 * p;

  Tensor4 padded({gs.d0, ks.d1, hp, wp});
  for (std::size_t n = 0; n < gs.d0; ++n) {
    for (std::size_t co = 0; co < ks.d0; ++co) {
      for (std::size_t h = 0; h < gs.d2; ++h) {
        for (std::size_t w = 0; w < gs.d3; ++w) {
          const double g = g_y(n, co, h, w);
          for (std::size_t ci = 0; ci < ks.d1; ++ci) {
            for (std::size_t u = 0; u < ks.d2; ++u) {
              for (std::size_t v = 0; v < ks.d3; ++v) {
                padded(n, ci, h + u, w + v) += g * weights(co, ci, u, v);
                counter.mul_add();
              }
            }
          }
        }
      }
    }
  }

  if (p == 0) return padded;
  Tensor4 g_x({gs.d0, ks.d1, hx, wx});
  for (std::size_t n = 0; n < gs.d0; ++n) {
    for (std::size_t ci = 0; ci < ks.d1; ++ci) {
      for (std::size_t h = 0; h < hx; ++h) {
        for (std::size_t w = 0; w < wx; ++w) g_x(n, ci, h, w) = padded(n, ci, h + p, w + p);
      }
    }
  }
  return g_x;
}

}  // namespace

Tensor4 conv2d_backward_input(const Tensor4& g_y, const Kernel4& weights, const ConvCfg& cfg) {
  NoCount none;
  return backward_input_loop(g_y, weights, cfg, none);
}

std::pair<Tensor4, OpCount> counted_backward_input(const Tensor4& g_y, const Kernel4& weights,
                                                   const ConvCfg& cfg) {
  Tally tally;
  Tensor4 g_x = backward_input_loop(g_y, weights, cfg, tally);
  return {std::move(g_x), tally.count};
}

Kernel4 conv2d_backward_kernel(const Tensor4& g_y, const Tensor4& x, const ConvCfg& cfg) {
  cfg.validate();
  const Shape4& gs = g_y.shape();
  const Shape4& xs = x.shape();
  if (gs.d0 != xs.d0) {
    throw ShapeError("conv2d_backward_kernel: batch mismatch " + to_string(gs) + " vs " +
                     to_string(xs));
  }
  const std::size_t p = cfg.padding;
  const std::size_t padded_h = xs.d2 + 2 * p;
  const std::size_t padded_w = xs.d3 + 2 * p;
  if (padded_h < gs.d2 || padded_w < gs.d3) {
    throw ShapeError("conv2d_backward_kernel: g_y " + to_string(gs) +
                     " larger than padded input " + to_string(xs));
  }
  const std::size_t kh = padded_h - gs.d2 + 1;
  const std::size_t kw = padded_w - gs.d3 + 1;
  Kernel4 g_k({gs.d1, xs.d1, kh, kw});

  for (std::size_t co = 0; co < gs.d1; ++co) {
    for (std::size_t ci = 0; ci < xs.d1; ++ci) {
      for (std::size_t u = 0; u < kh; ++u) {
        for (std::size_t v = 0; v < kw; ++v) {
          double acc = 0.0;
          for (std::size_t n = 0; n < gs.d0; ++n) {
            for (std::size_t h = 0; h < gs.d2; ++h) {
              const std::size_t hp = h + u;
              if (hp < p || hp - p >= xs.d2) continue;
              for (std::size_t w = 0; w < gs.d3; ++w) {
                const std::size_t wp = w + v;
                if (wp < p || wp - p >= xs.d3) continue;
                acc += x(n, ci, hp - p, wp - p) * g_y(n, co, h, w);
              }
            }
          }
          g_k(co, ci, u, v) = acc;
        }
      }
    }
  }
  return g_k;
}

std::vector<double> conv2d_backward_bias(const Tensor4& g_y) {
  const Shape4& s = g_y.shape();
  std::vector<double> g_b(s.d1, 0.0);
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (double g : g_y.plane(n, c)) g_b[c] += g;
    }
  }
  return g_b;
}

}  // namespace gradfilter
