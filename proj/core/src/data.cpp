#include "gradfilter/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "gradfilter/errors.hpp"
#include "gradfilter/rng.hpp"

namespace gradfilter {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("Dataset::subset: empty index list");
  const Shape4& s = images.shape();
  Dataset out;
  out.images = Tensor4({indices.size(), s.d1, s.d2, s.d3});
  out.labels.reserve(indices.size());
  out.class_count = class_count;
  out.norm = norm;
  const std::size_t stride = s.d1 * s.d2 * s.d3;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ShapeError("Dataset::subset: index out of range");
    std::copy_n(images.values().begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                out.images.values().begin() + static_cast<std::ptrdiff_t>(k * stride));
    out.labels.push_back(labels[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (images.shape().d0 != labels.size()) {
    throw ShapeError("Dataset: " + std::to_string(images.shape().d0) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t label : labels) {
    if (label >= class_count) {
      throw ShapeError("Dataset: label " + std::to_string(label) + " >= class count " +
                       std::to_string(class_count));
    }
  }
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw FormatError(path.string() + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::filesystem::path& path) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x (expected 0x%08x)", magic, expected);
    throw FormatError(path.string() + ": " + buf);
  }
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  check_magic(read_be32(bytes, 0, path), kIdxImagesMagic, path);
  IdxImages img;
  img.count = read_be32(bytes, 4, path);
  img.rows = read_be32(bytes, 8, path);
  img.cols = read_be32(bytes, 12, path);
  const std::size_t expected = std::size_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < expected) {
    throw FormatError(path.string() + ": truncated IDX image data (" +
                      std::to_string(bytes.size() - 16) + " of " + std::to_string(expected) +
                      " bytes)");
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(expected));
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  check_magic(read_be32(bytes, 0, path), kIdxLabelsMagic, path);
  const std::size_t count = read_be32(bytes, 4, path);
  if (bytes.size() - 8 < count) {
    throw FormatError(path.string() + ": truncated IDX label data");
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols) {
    throw ShapeError("write_idx_images: pixel count does not match header");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, images.count);
  put_be32(out, images.rows);
  put_be32(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Normalization compute_normalization(const Tensor4& images) {
  const Shape4& s = images.shape();
  Normalization norm{std::vector<double>(s.d1, 0.0), std::vector<double>(s.d1, 1.0)};
  const double count = static_cast<double>(s.d0 * s.plane());
  for (std::size_t c = 0; c < s.d1; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.d0; ++n) {
      for (double v : images.plane(n, c)) sum += v;
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.d0; ++n) {
      for (double v : images.plane(n, c)) sq += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(sq / count);
    norm.mean[c] = mean;
    norm.stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
  return norm;
}

void apply_normalization(Tensor4& images, const Normalization& norm) {
  const Shape4& s = images.shape();
  if (norm.mean.size() != s.d1 || norm.stddev.size() != s.d1) {
    throw ShapeError("apply_normalization: statistics for " + std::to_string(norm.mean.size()) +
                     " channels, images have " + std::to_string(s.d1));
  }
  for (std::size_t n = 0; n < s.d0; ++n) {
    for (std::size_t c = 0; c < s.d1; ++c) {
      for (double& v : images.plane(n, c)) v = (v - norm.mean[c]) / norm.stddev[c];
    }
  }
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t class_count) {
  const IdxImages raw = read_idx_images(images_path);
  const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (raw.count != labels.size()) {
    throw FormatError("load_idx: " + std::to_string(raw.count) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  if (raw.count == 0 || raw.rows == 0 || raw.cols == 0) {
    throw FormatError("load_idx: empty image set");
  }
  Dataset ds;
  ds.images = Tensor4({raw.count, 1, raw.rows, raw.cols});
  auto values = ds.images.values();
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) values[i] = raw.pixels[i] / 255.0;
  ds.labels.assign(labels.begin(), labels.end());
  const std::size_t max_label = *std::max_element(labels.begin(), labels.end());
  ds.class_count = class_count == 0 ? max_label + 1 : class_count;
  ds.validate();
  ds.norm = compute_normalization(ds.images);
  apply_normalization(ds.images, ds.norm);
  return ds;
}

namespace {

void check_synth(const SynthCfg& cfg) {
  if (cfg.classes < 2) throw ConfigError("synth_dataset: need at least 2 classes");
  if (cfg.per_class < 1) throw ConfigError("synth_dataset: per_class must be >= 1");
  if (cfg.noise < 0.0) throw ConfigError("synth_dataset: noise must be >= 0");
}

Tensor4 draw_templates(const SynthCfg& cfg, Rng& rng) {
  Tensor4 templates({cfg.classes, cfg.channels, cfg.height, cfg.width});
  for (double& v : templates.values()) v = rng.uniform();
  return templates;
}

}  // namespace

Tensor4 synth_templates(const SynthCfg& cfg) {
  check_synth(cfg);
  Rng rng(cfg.seed);
  return draw_templates(cfg, rng);
}

Dataset synth_dataset(const SynthCfg& cfg) {
  check_synth(cfg);
  Rng rng(cfg.seed);
  const Tensor4 templates = draw_templates(cfg, rng);
  const std::size_t n = cfg.classes * cfg.per_class;
  const std::size_t stride = cfg.channels * cfg.height * cfg.width;

  Dataset ds;
  ds.images = Tensor4({n, cfg.channels, cfg.height, cfg.width});
  ds.labels.resize(n);
  ds.class_count = cfg.classes;
  auto out = ds.images.values();
  const auto tpl = templates.values();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % cfg.classes;
    ds.labels[i] = label;
    for (std::size_t k = 0; k < stride; ++k) {
      const double v = tpl[label * stride + k] + cfg.noise * rng.normal();
      out[i * stride + k] = std::clamp(v, 0.0, 1.0);
    }
  }
  ds.norm = compute_normalization(ds.images);
  apply_normalization(ds.images, ds.norm);
  return ds;
}

std::pair<Dataset, Dataset> noniid_split(const Dataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.size();
  if (spec.shard_count < 2 || spec.shard_count % 2 != 0) {
    throw ConfigError("noniid_split: shard_count must be even and >= 2");
  }
  if (n % spec.shard_count != 0) {
    throw ConfigError("noniid_split: shard_count " + std::to_string(spec.shard_count) +
                      " does not divide dataset size " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.labels[a] < dataset.labels[b];
  });

  std::vector<std::size_t> shards(spec.shard_count);
  std::iota(shards.begin(), shards.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(shards);

  const std::size_t shard_size = n / spec.shard_count;
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    auto& dst = (k % 2 == 0) ? a : b;
    const std::size_t begin = shards[k] * shard_size;
    dst.insert(dst.end(), order.begin() + static_cast<std::ptrdiff_t>(begin),
               order.begin() + static_cast<std::ptrdiff_t>(begin + shard_size));
  }
  return {dataset.subset(a), dataset.subset(b)};
}

std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 2) throw ConfigError("train_val_split: need at least 2 samples");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train_val_split: val_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {dataset.subset(train), dataset.subset(val)};
}

double label_tv_distance(const Dataset& a, const Dataset& b) {
  const std::size_t k = std::max(a.class_count, b.class_count);
  std::vector<double> ha(k, 0.0);
  std::vector<double> hb(k, 0.0);
  for (std::size_t l : a.labels) ha[l] += 1.0 / static_cast<double>(a.size());
  for (std::size_t l : b.labels) hb[l] += 1.0 / static_cast<double>(b.size());
  double tv = 0.0;
  for (std::size_t c = 0; c < k; ++c) tv += std::abs(ha[c] - hb[c]);
  return 0.5 * tv;
}

}  // namespace gradfilter
