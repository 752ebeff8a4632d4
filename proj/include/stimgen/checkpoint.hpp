#pragma once

#include <string>
#include <vector>

#include "stimgen/vaegan.hpp"

namespace stimgen::vaegan {

// Binary model snapshot: magic "STMGCKPT", u32 version, architecture block,
// named parameter arrays (u32 name length, name, u32 rank, u64 dims, raw
// little-endian f64 data), then a CRC-32 of everything before it.
//
// Round trips are bit exact. Loading reports the failure kind: bad magic,
// unsupported version, structural overrun, and checksum mismatch raise
// distinct errors.

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'M', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> serialize_checkpoint(const VaeGanModel& model);
VaeGanModel deserialize_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const VaeGanModel& model, const std::string& path);
VaeGanModel load_checkpoint(const std::string& path);

}  // namespace stimgen::vaegan
