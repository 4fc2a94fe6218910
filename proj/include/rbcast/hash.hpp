#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rbcast {

/// 256-bit digest. One fixed hash function (SHA-256) is used across the
/// whole project so digests are comparable between modules.
using Digest = std::array<uint8_t, 32>;

Digest sha256(std::span<const uint8_t> data);

/// Incremental hasher for multi-part inputs.
class Hasher {
public:
    Hasher();
    Hasher& update(std::span<const uint8_t> data);
    Hasher& update_byte(uint8_t b);
    Hasher& update_u32(uint32_t v);   // big-endian
    Hasher& update_u64(uint64_t v);   // big-endian
    Digest finish();

private:
    std::vector<uint8_t> buf_;
};

std::string to_hex(const Digest& d);

}  // namespace rbcast
