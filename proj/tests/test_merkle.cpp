#include <doctest.h>

#include <random>

#include "rbcast/merkle.hpp"
#include "util.hpp"

using namespace rbcast;
using testutil::random_bytes;

namespace {

// independent reimplementation of the leaf/node hashing for the oracle
Digest leaf_hash(uint32_t index, const std::vector<uint8_t>& payload) {
    Hasher h;
    h.update_byte(0x00);
    h.update_u32(index);
    h.update(payload);
    return h.finish();
}

Digest node_hash(const Digest& l, const Digest& r) {
    Hasher h;
    h.update_byte(0x01);
    h.update(l);
    h.update(r);
    return h.finish();
}

std::vector<Fragment> make_leaves(uint32_t count, uint64_t seed,
                                  size_t payload = 16) {
    std::vector<Fragment> frags;
    for (uint32_t j = 0; j < count; ++j)
        frags.push_back(Fragment{j, random_bytes(payload, seed + j)});
    return frags;
}

}  // namespace

TEST_CASE("4-leaf tree matches the hand-computed oracle") {
    auto frags = make_leaves(4, 100);
    Digest L0 = leaf_hash(0, frags[0].payload);
    Digest L1 = leaf_hash(1, frags[1].payload);
    Digest L2 = leaf_hash(2, frags[2].payload);
    Digest L3 = leaf_hash(3, frags[3].payload);
    Digest expected = node_hash(node_hash(L0, L1), node_hash(L2, L3));

    CHECK(get_merkle_root(frags) == expected);

    auto proof = get_merkle_proof(frags, 2);
    REQUIRE(proof.siblings.size() == 2);
    CHECK(proof.leaf_index == 2);
    CHECK(proof.siblings[0] == L3);
    CHECK(proof.siblings[1] == node_hash(L0, L1));
}

TEST_CASE("single leaf: root is the leaf hash, proof is empty") {
    auto frags = make_leaves(1, 200);
    CHECK(get_merkle_root(frags) == leaf_hash(0, frags[0].payload));
    auto proof = get_merkle_proof(frags, 0);
    CHECK(proof.siblings.empty());
    CHECK(valid_merkle_proof(get_merkle_root(frags), frags[0], 0, proof, 1));
}

TEST_CASE("3 leaves: the odd node is promoted without a sibling") {
    auto frags = make_leaves(3, 300);
    Digest L0 = leaf_hash(0, frags[0].payload);
    Digest L1 = leaf_hash(1, frags[1].payload);
    Digest L2 = leaf_hash(2, frags[2].payload);
    CHECK(get_merkle_root(frags) == node_hash(node_hash(L0, L1), L2));

    auto proof = get_merkle_proof(frags, 2);
    REQUIRE(proof.siblings.size() == 1);
    CHECK(proof.siblings[0] == node_hash(L0, L1));
    CHECK(valid_merkle_proof(get_merkle_root(frags), frags[2], 2, proof, 3));
}

TEST_CASE("completeness: every proof verifies for leaf counts 1..12") {
    for (uint32_t n = 1; n <= 12; ++n) {
        auto frags = make_leaves(n, 400 + n);
        RootHash root = get_merkle_root(frags);
        for (uint32_t j = 0; j < n; ++j) {
            auto proof = get_merkle_proof(frags, j);
            CHECK(valid_merkle_proof(root, frags[j], j, proof, n));
            // sibling count bounded by the padded tree depth
            uint32_t depth = 0;
            while ((1u << depth) < n) ++depth;
            CHECK(proof.siblings.size() <= depth);
        }
    }
}

TEST_CASE("determinism and sensitivity") {
    auto frags = make_leaves(7, 500);
    CHECK(get_merkle_root(frags) == get_merkle_root(frags));
    auto mutated = frags;
    mutated[3].payload[0] ^= 0x01;
    CHECK(get_merkle_root(mutated) != get_merkle_root(frags));
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(get_merkle_root({}), std::invalid_argument);
    auto ragged = make_leaves(4, 600);
    ragged[2].payload.pop_back();
    CHECK_THROWS_AS(get_merkle_root(ragged), std::invalid_argument);
    auto frags = make_leaves(4, 700);
    CHECK_THROWS_AS(get_merkle_proof(frags, 4), std::out_of_range);
}

TEST_CASE("a proof presented at a different index is rejected") {
    auto frags = make_leaves(8, 800);
    RootHash root = get_merkle_root(frags);
    auto proof = get_merkle_proof(frags, 5);
    CHECK_FALSE(valid_merkle_proof(root, frags[5], 4, proof, 8));
    auto shifted = proof;
    shifted.leaf_index = 4;
    CHECK_FALSE(valid_merkle_proof(root, frags[5], 4, shifted, 8));
}

TEST_CASE("soundness: 10^4 random mutations are all rejected") {
    std::mt19937_64 rng(0xdead);
    int false_accepts = 0;
    for (int iter = 0; iter < 10000; ++iter) {
        uint32_t n = 1 + uint32_t(rng() % 12);
        auto frags = make_leaves(n, rng());
        RootHash root = get_merkle_root(frags);
        uint32_t j = uint32_t(rng() % n);
        auto proof = get_merkle_proof(frags, j);
        Fragment f = frags[j];

        switch (rng() % 4) {
            case 0:  // flip a payload bit
                f.payload[rng() % f.payload.size()] ^= uint8_t(1 << (rng() % 8));
                break;
            case 1: {  // present at a different index
                uint32_t j2 = uint32_t(rng() % n);
                if (j2 == j) j2 = (j2 + 1) % n;
                if (n == 1) continue;
                proof.leaf_index = j2;
                j = j2;
                break;
            }
            case 2:  // corrupt a sibling digest
                if (proof.siblings.empty()) continue;
                proof.siblings[rng() % proof.siblings.size()][rng() % 32] ^=
                    uint8_t(1 + rng() % 255);
                break;
            case 3:  // corrupt the root
                root[rng() % 32] ^= uint8_t(1 + rng() % 255);
                break;
        }
        if (valid_merkle_proof(root, f, j, proof, n)) ++false_accepts;
    }
    CHECK(false_accepts == 0);
}

TEST_CASE("structurally malformed proofs return false, never throw") {
    auto frags = make_leaves(4, 900);
    RootHash root = get_merkle_root(frags);
    auto proof = get_merkle_proof(frags, 1);

    auto longer = proof;
    longer.siblings.push_back(Digest{});
    CHECK_FALSE(valid_merkle_proof(root, frags[1], 1, longer, 4));

    auto shorter = proof;
    shorter.siblings.pop_back();
    CHECK_FALSE(valid_merkle_proof(root, frags[1], 1, shorter, 4));

    CHECK_FALSE(valid_merkle_proof(root, frags[1], 7, proof, 4));
}
