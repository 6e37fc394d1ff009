#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "crowdsac/diff/params.hpp"

namespace crowdsac::diff {

// Checkpoint layout, all integers and floats little-endian:
//   magic "CSACPARM" (8 bytes), u32 version,
//   u64 entry count, then per entry in name order:
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)].
inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'A', 'C', 'P', 'A', 'R', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_params(const ParameterStore& params);

// Throws ParseError with "bad magic", "unsupported version" or "truncated".
ParameterStore deserialize_params(std::span<const std::uint8_t> bytes);

void save_params(const ParameterStore& params, const std::filesystem::path& path);
ParameterStore load_params(const std::filesystem::path& path);

}  // namespace crowdsac::diff
