#include "gradfilter/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradfilter/rng.hpp"

namespace gradfilter {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

Model::Model(std::size_t channels, std::size_t height, std::size_t width)
    : input_shape_{1, channels, height, width}, current_{1, channels, height, width} {
  if (channels == 0 || height == 0 || width == 0) {
    throw ConfigError("Model: input dimensions must be >= 1");
  }
}

Model& Model::conv(std::size_t out_channels, std::size_t kernel, std::size_t padding) {
  ConvLayer layer;
  layer.cfg = ConvCfg{padding, 1};
  layer.weights = Kernel4({out_channels, current_.d1, kernel, kernel});
  layer.bias.assign(out_channels, 0.0);
  layer.input_shape = current_;
  layer.output_shape = {1, out_channels, conv_output_extent(current_.d2, kernel, padding),
                        conv_output_extent(current_.d3, kernel, padding)};
  current_ = layer.output_shape;
  layers_.emplace_back(std::move(layer));
  return *this;
}

Model& Model::relu() {
  layers_.emplace_back(ReluLayer{current_, {}});
  return *this;
}

Model& Model::avgpool2() {
  if (current_.d2 < 2 || current_.d3 < 2) throw ShapeError("Model::avgpool2: map smaller than 2x2");
  layers_.emplace_back(AvgPool2Layer{current_, current_});
  current_ = {1, current_.d1, current_.d2 / 2, current_.d3 / 2};
  return *this;
}

Model& Model::flatten() {
  layers_.emplace_back(FlattenLayer{current_, current_});
  current_ = {1, current_.d1 * current_.d2 * current_.d3, 1, 1};
  return *this;
}

Model& Model::linear(std::size_t out_features) {
  if (current_.d2 != 1 || current_.d3 != 1) flatten();
  LinearLayer layer;
  layer.in_features = current_.d1;
  layer.out_features = out_features;
  layer.weights.assign(out_features * layer.in_features, 0.0);
  layer.bias.assign(out_features, 0.0);
  layers_.emplace_back(std::move(layer));
  current_ = {1, out_features, 1, 1};
  return *this;
}

void Model::init(std::uint64_t seed) {
  Rng rng(seed);
  for (Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](ConvLayer& c) {
                     const Shape4& s = c.weights.shape();
                     const double bound = std::sqrt(6.0 / static_cast<double>(s.d1 * s.d2 * s.d3));
                     for (double& w : c.weights.values()) w = rng.uniform(-bound, bound);
                     std::fill(c.bias.begin(), c.bias.end(), 0.0);
                   },
                   [&](LinearLayer& l) {
                     const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_features));
                     for (double& w : l.weights) w = rng.uniform(-bound, bound);
                     std::fill(l.bias.begin(), l.bias.end(), 0.0);
                   },
                   [](auto&) {},
               },
               layer);
  }
}

Tensor4 Model::forward(const Tensor4& x, bool training) {
  const Shape4& s = x.shape();
  if (s.d1 != input_shape_.d1 || s.d2 != input_shape_.d2 || s.d3 != input_shape_.d3) {
    throw ShapeError("Model::forward: expected per-sample " + to_string(input_shape_) + ", got " +
                     to_string(s));
  }
  Tensor4 act = x;
  for (Layer& layer : layers_) {
    act = std::visit([&](auto& l) { return l.forward(act, training); }, layer);
  }
  return act;
}

void Model::backward(const Tensor4& g_logits) {
  // Earliest layer that owns trainable parameters; nothing below it needs g.
  std::size_t stop = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool trainable = std::visit(Overloaded{
                                          [](const ConvLayer& c) { return c.mode.trainable(); },
                                          [](const LinearLayer&) { return true; },
                                          [](const auto&) { return false; },
                                      },
                                      layers_[i]);
    if (trainable) {
      stop = i;
      break;
    }
  }
  if (stop == layers_.size()) return;

  Tensor4 g = g_logits;
  for (std::size_t i = layers_.size(); i-- > stop;) {
    const bool need = i > stop;
    std::visit(Overloaded{
                   [&](ConvLayer& c) {
                     auto gx = c.backward(g, need);
                     if (gx) g = std::move(*gx);
                   },
                   [&](LinearLayer& l) {
                     auto gx = l.backward(g, need);
                     if (gx) g = std::move(*gx);
                   },
                   [&](auto& l) {
                     if (need) g = l.backward(g);
                   },
               },
               layers_[i]);
  }
}

void Model::set_active_layers(std::size_t k, ConvMode mode) {
  const auto convs = conv_indices();
  if (k > convs.size()) {
    throw ConfigError("set_active_layers: k = " + std::to_string(k) + " but model has " +
                      std::to_string(convs.size()) + " conv layers");
  }
  if (mode.kind == ConvMode::Kind::filtered && mode.r < 1) {
    throw ConfigError("set_active_layers: filtered mode needs r >= 1");
  }
  for (std::size_t j = 0; j < convs.size(); ++j) {
    auto& c = std::get<ConvLayer>(layers_[convs[j]]);
    c.mode = (j + k >= convs.size()) ? mode : ConvMode::frozen();
    c.clear_cache();
  }
}

void Model::set_partial_patch_mode(PartialPatchMode mode) {
  for (Layer& layer : layers_) {
    if (auto* c = std::get_if<ConvLayer>(&layer)) c->partial = mode;
  }
}

std::vector<ParamRef> Model::trainable_params() {
  std::vector<ParamRef> params;
  for (Layer& layer : layers_) {
    if (auto* c = std::get_if<ConvLayer>(&layer)) {
      if (!c->mode.trainable()) continue;
      if (c->grad_weights.shape() != c->weights.shape()) c->grad_weights = Kernel4(c->weights.shape());
      c->grad_bias.resize(c->bias.size(), 0.0);
      params.push_back({c->weights.values(), c->grad_weights.values()});
      params.push_back({c->bias, c->grad_bias});
    } else if (auto* l = std::get_if<LinearLayer>(&layer)) {
      l->grad_weights.resize(l->weights.size(), 0.0);
      l->grad_bias.resize(l->bias.size(), 0.0);
      params.push_back({l->weights, l->grad_weights});
      params.push_back({l->bias, l->grad_bias});
    }
  }
  return params;
}

std::vector<std::size_t> Model::conv_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (std::holds_alternative<ConvLayer>(layers_[i])) idx.push_back(i);
  }
  return idx;
}

LayerCfg Model::layer_cfg(std::size_t layer_index) const {
  const auto& c = std::get<ConvLayer>(layers_.at(layer_index));
  const Shape4& k = c.weights.shape();
  return LayerCfg{k.d1,
                  k.d0,
                  c.output_shape.d2,
                  c.output_shape.d3,
                  k.d2,
                  k.d3,
                  c.input_shape.d2,
                  c.input_shape.d3};
}

std::size_t Model::stored_activation_elements() const {
  std::size_t total = 0;
  for (const Layer& layer : layers_) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) total += c->stored_activation_elements();
  }
  return total;
}

void Model::clear_caches() {
  for (Layer& layer : layers_) std::visit([](auto& l) { l.clear_cache(); }, layer);
}

Model make_desk_model(std::size_t channels, std::size_t height, std::size_t width,
                      std::size_t classes, std::uint64_t seed) {
  Model m(channels, height, width);
  m.conv(8, 3, 1).relu().avgpool2();
  m.conv(16, 3, 1).relu().avgpool2();
  m.conv(32, 3, 1).relu().flatten().linear(classes);
  m.init(seed);
  return m;
}

}  // namespace gradfilter
