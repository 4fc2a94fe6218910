#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbcast/params.hpp"

namespace rbcast {

/// One erasure-coded shard of a message. All fragments produced from one
/// message have payloads of equal length ceil((|m| + 8) / k).
struct Fragment {
    uint32_t index = 0;            // leaf position in [0, n)
    std::vector<uint8_t> payload;

    bool operator==(const Fragment&) const = default;
};

/// Splits m into n fragments such that any k of them recover m exactly.
/// The first k fragments are systematic: a length-prefixed, zero-padded
/// copy of m cut into k equal shards. Throws on empty or oversized input.
std::vector<Fragment> get_fragments(std::span<const uint8_t> m,
                                    const ProtocolParams& params);

/// Recovers the original message from any >= k fragments with distinct
/// indices. Never throws on untrusted content: structurally malformed input
/// (too few fragments, ragged payloads, bad indices, undecodable length
/// header) yields an all-zeros sentinel message. Undetectably inconsistent
/// fragments decode to garbage; callers recheck the Merkle root.
std::vector<uint8_t> recover_message(const std::vector<Fragment>& frags,
                                     const ProtocolParams& params);

struct BenchStats {
    double mean_us = 0;
    double p5_us = 0;
    double p95_us = 0;
};

struct BenchSide {
    uint32_t n = 0;
    uint32_t k = 0;
    BenchStats encode;
    BenchStats decode;
};

struct BenchReport {
    size_t input_size = 0;
    size_t repetitions = 0;
    std::string input_digest;   // hex digest of the benchmarked input
    BenchSide a;
    BenchSide b;
    // mean(a) / mean(b); > 1 means b is faster
    double encode_speedup = 0;
    double decode_speedup = 0;
};

/// Times encode/decode for two parameterizations over the same random input
/// (derived from `seed`). Decode subsets rotate deterministically.
BenchReport bench_codec(const ProtocolParams& params_a,
                        const ProtocolParams& params_b, size_t input_size,
                        size_t repetitions, uint64_t seed = 1);

namespace gf256 {
uint8_t mul(uint8_t a, uint8_t b);
uint8_t inv(uint8_t a);
/// 256-entry multiplication-table row for a fixed coefficient.
const uint8_t* row(uint8_t coef);
}  // namespace gf256

}  // namespace rbcast
