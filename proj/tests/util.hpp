#pragma once

#include <random>
#include <vector>

#include "rbcast/codec.hpp"
#include "rbcast/merkle.hpp"
#include "rbcast/messages.hpp"

namespace rbcast::testutil {

inline std::vector<uint8_t> random_bytes(size_t size, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<uint8_t> m(size);
    for (auto& b : m) b = uint8_t(rng());
    return m;
}

/// One valid FragmentMessage per leaf for a given message.
inline std::vector<FragmentMessage> frag_msgs(std::span<const uint8_t> m,
                                              const ProtocolParams& params,
                                              uint64_t instance = 1) {
    auto frags = get_fragments(m, params);
    RootHash h = get_merkle_root(frags);
    std::vector<FragmentMessage> out;
    for (uint32_t j = 0; j < params.n; ++j)
        out.push_back(FragmentMessage{instance, h, j, frags[j],
                                      get_merkle_proof(frags, j)});
    return out;
}

/// All k-element index subsets of [0, n).
inline std::vector<std::vector<uint32_t>> subsets(uint32_t n, uint32_t k) {
    std::vector<std::vector<uint32_t>> out;
    std::vector<uint32_t> cur;
    auto rec = [&](auto&& self, uint32_t start) -> void {
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (uint32_t i = start; i < n; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

}  // namespace rbcast::testutil
