#include "gradfilter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gradfilter/errors.hpp"

namespace gradfilter {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

enum class LayerKind : std::uint8_t { conv = 0, relu = 1, avgpool2 = 2, flatten = 3, linear = 4 };

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot write " + path.string());
  }
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void blob(std::uint32_t layer, std::uint8_t role, std::span<const double> values) {
    put(layer);
    put(role);
    put(static_cast<std::uint64_t>(values.size()));
    bytes(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  template <class T>
  T get() {
    T v;
    need(sizeof v);
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  void read(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  [[nodiscard]] bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_.string() + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::filesystem::path path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  const Shape4& in = model.input_shape();
  w.put(static_cast<std::uint32_t>(in.d1));
  w.put(static_cast<std::uint32_t>(in.d2));
  w.put(static_cast<std::uint32_t>(in.d3));

  const auto& layers = model.layers();
  w.put(static_cast<std::uint32_t>(layers.size()));
  std::uint32_t blobs = 0;
  for (const Layer& layer : layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      w.put(LayerKind::conv);
      w.put(static_cast<std::uint32_t>(c->weights.shape().d0));
      w.put(static_cast<std::uint32_t>(c->weights.shape().d2));
      w.put(static_cast<std::uint32_t>(c->cfg.padding));
      blobs += 2;
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      w.put(LayerKind::relu);
    } else if (std::holds_alternative<AvgPool2Layer>(layer)) {
      w.put(LayerKind::avgpool2);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      w.put(LayerKind::flatten);
    } else if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      w.put(LayerKind::linear);
      w.put(static_cast<std::uint32_t>(l->out_features));
      blobs += 2;
    }
  }

  w.put(blobs);
  for (std::uint32_t i = 0; i < layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer>(&layers[i])) {
      w.blob(i, 0, c->weights.values());
      w.blob(i, 1, c->bias);
    } else if (const auto* l = std::get_if<LinearLayer>(&layers[i])) {
      w.blob(i, 0, l->weights);
      w.blob(i, 1, l->bias);
    }
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kCheckpointMagic];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) r.fail("bad checkpoint magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  const auto c = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  if (c == 0 || h == 0 || w == 0) r.fail("zero input dimension");
  Model model(c, h, w);

  const auto layer_count = r.get<std::uint32_t>();
  try {
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      switch (static_cast<LayerKind>(r.get<std::uint8_t>())) {
        case LayerKind::conv: {
          const auto out = r.get<std::uint32_t>();
          const auto k = r.get<std::uint32_t>();
          const auto pad = r.get<std::uint32_t>();
          if (out == 0 || k == 0) r.fail("bad conv layer");
          model.conv(out, k, pad);
          break;
        }
        case LayerKind::relu: model.relu(); break;
        case LayerKind::avgpool2: model.avgpool2(); break;
        case LayerKind::flatten: model.flatten(); break;
        case LayerKind::linear: {
          const auto out = r.get<std::uint32_t>();
          if (out == 0) r.fail("bad linear layer");
          model.linear(out);
          break;
        }
        default: r.fail("unknown layer kind");
      }
    }
  } catch (const ShapeError& e) {
    r.fail(std::string("inconsistent architecture: ") + e.what());
  }
  if (model.layers().size() != layer_count) r.fail("architecture has implicit layers");

  const auto blob_count = r.get<std::uint32_t>();
  for (std::uint32_t b = 0; b < blob_count; ++b) {
    const auto index = r.get<std::uint32_t>();
    const auto role = r.get<std::uint8_t>();
    const auto length = r.get<std::uint64_t>();
    if (index >= model.layers().size() || role > 1) r.fail("bad blob key");
    std::span<double> dst;
    Layer& layer = model.layers()[index];
    if (auto* cl = std::get_if<ConvLayer>(&layer)) {
      dst = role == 0 ? cl->weights.values() : std::span<double>(cl->bias);
    } else if (auto* ll = std::get_if<LinearLayer>(&layer)) {
      dst = role == 0 ? std::span<double>(ll->weights) : std::span<double>(ll->bias);
    } else {
      r.fail("blob for a parameter-free layer");
    }
    if (dst.size() != length) r.fail("blob length mismatch at layer " + std::to_string(index));
    r.read(dst.data(), length * sizeof(double));
  }
  if (!r.done()) r.fail("trailing bytes");
  return model;
}

}  // namespace gradfilter
