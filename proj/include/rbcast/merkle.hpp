#pragma once

#include <cstdint>
#include <vector>

#include "rbcast/codec.hpp"
#include "rbcast/hash.hpp"

namespace rbcast {

using RootHash = Digest;

/// Sibling path authenticating one fragment against a root digest. The leaf
/// commitment is recomputed from the fragment, not stored. Levels where the
/// node is promoted unchanged (odd layer width) contribute no sibling.
struct MerkleProof {
    uint32_t leaf_index = 0;
    std::vector<Digest> siblings;

    bool operator==(const MerkleProof&) const = default;
};

/// Root over the n fragments. Leaf hashing is domain-separated and binds the
/// leaf position: leaf = H(0x00 || index || payload), node = H(0x01 || l || r).
/// Throws on an empty or ragged fragment list.
RootHash get_merkle_root(const std::vector<Fragment>& frags);

/// Proof for fragment j; verifies against get_merkle_root(frags).
MerkleProof get_merkle_proof(const std::vector<Fragment>& frags, uint32_t j);

/// True iff recomputing the path from leaf j through the siblings yields h.
/// All inputs untrusted; malformed input returns false. leaf_count is the
/// tree width n, known to every protocol participant.
bool valid_merkle_proof(const RootHash& h, const Fragment& f, uint32_t j,
                        const MerkleProof& proof, uint32_t leaf_count);

}  // namespace rbcast
