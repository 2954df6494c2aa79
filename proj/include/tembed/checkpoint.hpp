#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tembed/network.hpp"

namespace tembed {

/// Binary model container, all integers and floats little-endian:
///
///   offset  size  field
///   0       8     magic "TEMBCKPT"
///   8       4     u32 format version (1)
///   12      4     u32 input side
///   16      4     u32 layer count L
///   20      16*L  per layer: u32 kind, u32 units, u32 kernel/window, u32 stride
///   ..      8     u64 parameter count P
///   ..      8*P   f64 parameters in NetworkParams::values() order
///
/// Layer kinds: 1 conv, 2 relu, 3 maxpool, 4 global_avg_pool, 5 dense,
/// 6 l2_normalize. The third field holds the conv kernel side or the
/// maxpool window; unused fields are 0 (stride 1).
inline constexpr char kCheckpointMagic[8] = {'T', 'E', 'M', 'B', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params);
NetworkParams decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

} // namespace tembed
