#include "rbcast/merkle.hpp"

#include <stdexcept>

namespace rbcast {

namespace {

Digest leaf_hash(const Fragment& f, uint32_t index) {
    Hasher h;
    h.update_byte(0x00);
    h.update_u32(index);
    h.update(f.payload);
    return h.finish();
}

Digest node_hash(const Digest& left, const Digest& right) {
    Hasher h;
    h.update_byte(0x01);
    h.update(left);
    h.update(right);
    return h.finish();
}

std::vector<Digest> leaf_layer(const std::vector<Fragment>& frags) {
    if (frags.empty())
        throw std::invalid_argument("merkle: empty fragment list");
    const size_t len = frags.front().payload.size();
    std::vector<Digest> layer;
    layer.reserve(frags.size());
    for (uint32_t i = 0; i < frags.size(); ++i) {
        if (frags[i].payload.size() != len || frags[i].payload.empty())
            throw std::invalid_argument("merkle: ragged fragment payloads");
        layer.push_back(leaf_hash(frags[i], i));
    }
    return layer;
}

}  // namespace

RootHash get_merkle_root(const std::vector<Fragment>& frags) {
    std::vector<Digest> layer = leaf_layer(frags);
    while (layer.size() > 1) {
        std::vector<Digest> next;
        next.reserve((layer.size() + 1) / 2);
        for (size_t i = 0; i + 1 < layer.size(); i += 2)
            next.push_back(node_hash(layer[i], layer[i + 1]));
        if (layer.size() % 2 == 1) next.push_back(layer.back());  // promote
        layer = std::move(next);
    }
    return layer.front();
}

MerkleProof get_merkle_proof(const std::vector<Fragment>& frags, uint32_t j) {
    if (j >= frags.size())
        throw std::out_of_range("merkle: leaf index out of range");
    std::vector<Digest> layer = leaf_layer(frags);
    MerkleProof proof;
    proof.leaf_index = j;
    uint32_t pos = j;
    while (layer.size() > 1) {
        const size_t width = layer.size();
        if (pos % 2 == 1)
            proof.siblings.push_back(layer[pos - 1]);
        else if (pos + 1 < width)
            proof.siblings.push_back(layer[pos + 1]);
        // else: odd node promoted, no sibling at this level

        std::vector<Digest> next;
        next.reserve((width + 1) / 2);
        for (size_t i = 0; i + 1 < width; i += 2)
            next.push_back(node_hash(layer[i], layer[i + 1]));
        if (width % 2 == 1) next.push_back(layer.back());
        layer = std::move(next);
        pos /= 2;
    }
    return proof;
}

bool valid_merkle_proof(const RootHash& h, const Fragment& f, uint32_t j,
                        const MerkleProof& proof, uint32_t leaf_count) {
    if (leaf_count == 0 || j >= leaf_count || proof.leaf_index != j ||
        f.payload.empty())
        return false;

    Digest cur = leaf_hash(f, j);
    uint32_t pos = j;
    uint32_t width = leaf_count;
    size_t next_sibling = 0;
    while (width > 1) {
        const bool promoted = (pos == width - 1) && (width % 2 == 1);
        if (!promoted) {
            if (next_sibling >= proof.siblings.size()) return false;
            const Digest& sib = proof.siblings[next_sibling++];
            cur = (pos % 2 == 1) ? node_hash(sib, cur) : node_hash(cur, sib);
        }
        pos /= 2;
        width = (width + 1) / 2;
    }
    if (next_sibling != proof.siblings.size()) return false;
    return cur == h;
}

}  // namespace rbcast
