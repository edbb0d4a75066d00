#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gjam/nnet/network.hpp"

namespace gjam::nnet {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Binary model file:
///   "GJNN", u16 version,
///   architecture: u16 in_channels, u16 freq_pool, u16 stem_width, u16 n_blocks, u16 width[n_blocks],
///   u16 n_heads, per head: u16 id length, id bytes, u8 kind, u16 n_c, f64 weight, f64 target mean, f64 target std,
///   parameter blocks as little-endian f32 in a fixed order: input mean and scale (2 * in_channels each), per conv (stem, then conv1, conv2, proj of each
///   block) weight, bias, scale; per head weight, bias.
/// Values are rounded to f32 on save.
std::vector<std::uint8_t> serialize(const Network& net);
Network deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
/// Throws BadMagic, VersionMismatch, TruncatedRecord, Io.
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace gjam::nnet
