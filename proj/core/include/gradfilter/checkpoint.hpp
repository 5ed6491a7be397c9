#pragma once

#include <cstdint>
#include <filesystem>

#include "gradfilter/model.hpp"

namespace gradfilter {

/// Binary model container, little-endian throughout:
///
///   8 bytes   magic "GFCKPT\0\0"
///   u32       format version (1)
///   u32 x 3   input C, H, W
///   u32       layer count, then per layer:
///               u8 kind (0 conv, 1 relu, 2 avgpool2, 3 flatten, 4 linear)
///               conv:   u32 out_channels, u32 kernel, u32 padding
///               linear: u32 out_features
///   u32       blob count, then per blob:
///               u32 layer index, u8 role (0 weights, 1 bias), u64 length,
///               length x f64
inline constexpr char kCheckpointMagic[8] = {'G', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rebuilds the architecture and parameters. Conv layers come back in
/// vanilla mode. Throws FormatError on any inconsistency.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gradfilter
