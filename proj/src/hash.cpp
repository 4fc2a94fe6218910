#include "rbcast/hash.hpp"

#include <openssl/sha.h>

namespace rbcast {

Digest sha256(std::span<const uint8_t> data) {
    Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Hasher::Hasher() { buf_.reserve(128); }

Hasher& Hasher::update(std::span<const uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
    return *this;
}

Hasher& Hasher::update_byte(uint8_t b) {
    buf_.push_back(b);
    return *this;
}

Hasher& Hasher::update_u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    return *this;
}

Hasher& Hasher::update_u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    return *this;
}

Digest Hasher::finish() { return sha256(buf_); }

std::string to_hex(const Digest& d) {
    static const char* hexd = "0123456789abcdef";
    std::string s;
    s.reserve(d.size() * 2);
    for (uint8_t b : d) {
        s.push_back(hexd[b >> 4]);
        s.push_back(hexd[b & 0xf]);
    }
    return s;
}

}  // namespace rbcast
