#pragma once

#include <cstddef>
#include <cstdint>

namespace stimgen {

// Standard reflected CRC-32 (polynomial 0xEDB88320), the zlib/PNG checksum.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace stimgen
