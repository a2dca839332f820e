#pragma once

#include <filesystem>
#include <iosfwd>

#include "metaood/encoder.hpp"

namespace metaood {

// Checkpoint layout, all integers and floats little-endian:
//
//   char[8]  magic "MOODCKPT"
//   u32      version (1)
//   u32      input_dim
//   u32      latent_dim
//   u32      hidden layer count H
//   u32[H]   hidden widths
//   f64      dropout_rate
//   u64      P = number of weight/bias values
//   f64[P]   W₀ (row-major, fan_in x fan_out), b₀, W₁, b₁, ...
//   f64      log_beta
inline constexpr char kCheckpointMagic[8] = {'M', 'O', 'O', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const CommonParams& params);
CommonParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const CommonParams& params);
CommonParams load_checkpoint(const std::filesystem::path& path);

}  // namespace metaood
