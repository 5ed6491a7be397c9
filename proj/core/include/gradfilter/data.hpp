#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "gradfilter/tensor.hpp"

namespace gradfilter {

/// Per-channel affine statistics applied to a dataset's images.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  Tensor4 images;  ///< (N, C, H, W), normalised
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;
  Normalization norm;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }

  /// Copies the listed samples, preserving order. Throws on an empty list.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;

  /// Throws ShapeError unless labels and images agree and every label < K.
  void validate() const;
};

/// Raw IDX image container (magic 0x00000803, unsigned bytes, 3 dims).
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Pixels scaled to [0,1] and normalised with the set's own statistics.
/// class_count == 0 means max(label) + 1.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t class_count = 0);

Normalization compute_normalization(const Tensor4& images);
void apply_normalization(Tensor4& images, const Normalization& norm);

struct SynthCfg {
  std::uint64_t seed = 1;
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.25;
};

/// Class templates (K, C, H, W), uniform in [0,1], before normalisation.
Tensor4 synth_templates(const SynthCfg& cfg);

/// Sample i has label i mod K and equals clamp(template + N(0, noise^2), 0, 1),
/// then the whole set is normalised.
Dataset synth_dataset(const SynthCfg& cfg);

struct SplitSpec {
  std::size_t shard_count = 2;
  std::uint64_t seed = 1;
};

/// Label-sorted shards dealt alternately to two equal partitions after a
/// seeded shuffle of the shard order.
std::pair<Dataset, Dataset> noniid_split(const Dataset& dataset, const SplitSpec& spec);

/// Seeded random split; the validation part gets round(N * val_fraction)
/// samples (at least one of each side).
std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed);

/// Total-variation distance between the label histograms of two sets.
double label_tv_distance(const Dataset& a, const Dataset& b);

}  // namespace gradfilter
