#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

namespace rbcast {

using NodeId = uint32_t;
using SimTime = uint64_t;

/// Destination marker for messages addressed to every other node.
inline constexpr NodeId kBroadcast = 0xffffffffu;

/// Global parameters of one protocol deployment.
///
/// n = 3t+1 nodes, of which at most t are Byzantine. k is the erasure-code
/// recovery threshold: 2t+1 for the low-overhead protocols, t+1 for the
/// baseline.
struct ProtocolParams {
    uint32_t n = 0;
    uint32_t t = 0;
    uint32_t k = 0;
    uint32_t kappa = 256;          // digest size in bits
    size_t ell_max = 1u << 20;     // max message size in bytes

    static ProtocolParams make(uint32_t n, uint32_t k, uint32_t kappa = 256,
                               size_t ell_max = 1u << 20) {
        ProtocolParams p;
        if (n < 4 || (n - 1) % 3 != 0)
            throw std::invalid_argument("n must equal 3t+1 with t >= 1");
        p.n = n;
        p.t = (n - 1) / 3;
        p.k = k;
        p.kappa = kappa;
        p.ell_max = ell_max;
        p.validate();
        return p;
    }

    /// k = 2t+1 parameterization used by the main protocols.
    static ProtocolParams high_rate(uint32_t n, size_t ell_max = 1u << 20) {
        uint32_t t = (n - 1) / 3;
        return make(n, 2 * t + 1, 256, ell_max);
    }

    /// k = t+1 parameterization used by the baseline.
    static ProtocolParams low_rate(uint32_t n, size_t ell_max = 1u << 20) {
        uint32_t t = (n - 1) / 3;
        return make(n, t + 1, 256, ell_max);
    }

    void validate() const {
        if (t < 1 || n != 3 * t + 1)
            throw std::invalid_argument("n must equal 3t+1 with t >= 1");
        if (k != t + 1 && k != 2 * t + 1)
            throw std::invalid_argument("k must be t+1 or 2t+1");
        if (kappa < 256)
            throw std::invalid_argument("kappa must be at least 256 bits");
        if (ell_max == 0)
            throw std::invalid_argument("ell_max must be positive");
        if (n > 255)
            throw std::invalid_argument("codec supports at most 255 nodes");
    }

    size_t digest_bytes() const { return kappa / 8; }
};

}  // namespace rbcast
