#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "rbcast/merkle.hpp"
#include "rbcast/thresh.hpp"

namespace rbcast {

/// fragment(h, j, f_j, pi_j). In piggyback mode a signature share or a full
/// signature may ride along instead of a standalone signed proposal.
struct FragmentMessage {
    uint64_t instance = 0;
    RootHash root{};
    uint32_t leaf_index = 0;
    Fragment fragment;
    MerkleProof proof;
    std::optional<SignatureShare> attached_share;
    std::optional<ThresholdSignature> attached_sig;

    bool operator==(const FragmentMessage&) const = default;
};

/// proposal(h), plain variant.
struct ProposalMessage {
    uint64_t instance = 0;
    RootHash root{};

    bool operator==(const ProposalMessage&) const = default;
};

/// proposal(h, sigma): exactly one of share / sig is present.
struct SignedProposalMessage {
    uint64_t instance = 0;
    RootHash root{};
    std::optional<SignatureShare> share;
    std::optional<ThresholdSignature> sig;

    bool operator==(const SignedProposalMessage&) const = default;
};

using Message =
    std::variant<FragmentMessage, ProposalMessage, SignedProposalMessage>;

/// Canonical binary encoding; the basis for byte accounting and trace digests.
std::vector<uint8_t> encode_message(const Message& msg);

/// Serialized size in bytes.
size_t wire_size(const Message& msg);

/// Bytes of the serialization attributable to signature material (shares,
/// threshold signatures). Zero for plain messages.
size_t signature_bytes(const Message& msg);

const char* kind_name(const Message& msg);

uint64_t instance_of(const Message& msg);

/// A node's pending emissions from one handler invocation, plus an optional
/// wake-up request used by the delta delivery gate.
struct OutboxEntry {
    NodeId to = kBroadcast;   // kBroadcast = every other node
    Message msg;
};

struct Outbox {
    std::vector<OutboxEntry> entries;
    std::optional<SimTime> wake_at;
};

}  // namespace rbcast
