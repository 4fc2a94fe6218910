#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "rbcast/messages.hpp"

namespace rbcast {

struct BitConfig {
    ProtocolParams params;
    NodeId self = 0;
    NodeId sender = 0;
    uint64_t instance = 0;
    /// Reject a second fragment-bearing root hash per peer (lowers peak
    /// storage from 2 ell_max to 3/2 ell_max).
    bool strict_single_hash_fragments = false;
    /// Delivery gate: require at least delta simulated time since this
    /// node's first accepted fragment before delivering.
    std::optional<SimTime> delta;
    /// Test hook: replaces the message-recovery routine.
    std::function<std::vector<uint8_t>(const std::vector<Fragment>&,
                                       const ProtocolParams&)>
        recover_override;
};

/// Deterministic, message-driven state machine for one node of the
/// hash-based protocol. Broadcast emissions are applied to the node's own
/// state immediately and never appear as self-addressed outbox entries.
class BitNode {
public:
    explicit BitNode(BitConfig cfg);

    /// Sender only: disperses fragments to every other node.
    Outbox start_broadcast(std::span<const uint8_t> m, SimTime now = 0);

    /// Handles one incoming message. `accepted` (if given) reports whether
    /// the message passed the acceptance rules; rejected messages leave the
    /// state unchanged.
    Outbox on_message(NodeId from, const Message& msg, SimTime now,
                      bool* accepted = nullptr);

    /// Re-runs state-based actions; used by the delta delivery gate.
    Outbox on_timer(SimTime now);

    const std::optional<std::vector<uint8_t>>& delivered() const {
        return delivered_;
    }
    std::optional<SimTime> delivered_at() const { return delivered_at_; }
    bool done() const { return done_; }

    size_t current_fragment_bytes() const { return cur_frag_bytes_; }
    size_t peak_fragment_bytes() const { return peak_frag_bytes_; }

    /// Root hashes for which this node has sent any fragment (broadcasts and
    /// targeted top-ups). Honest A_bit nodes never exceed one.
    const std::set<RootHash>& fragment_roots_sent() const {
        return frag_roots_sent_;
    }

    nlohmann::json snapshot() const;
    /// Canonical digest over the behavior-relevant state; equal digests
    /// imply identical future behavior.
    Digest state_digest() const;

    const BitConfig& config() const { return cfg_; }

private:
    bool handle_fragment(NodeId from, const FragmentMessage& m, SimTime now);
    bool handle_proposal(NodeId from, const ProposalMessage& m);
    bool dispatch(NodeId from, const Message& msg, SimTime now);
    void run_to_fixpoint(SimTime now);
    bool evaluate_state_actions(SimTime now);
    void try_deliver(const RootHash& h, SimTime now);

    void broadcast_msg(Message m);
    void send_msg(NodeId to, Message m);

    size_t proposal_count(const RootHash& h) const;
    size_t fragment_count(const RootHash& h) const;
    const Fragment* own_fragment(const RootHash& h) const;
    std::set<RootHash> known_hashes() const;

    BitConfig cfg_;

    // F(h, v) -> (fragment, proof); R(h) -> fragment senders;
    // H(v) -> hashes seen from v; P(h) -> proposers
    std::map<RootHash, std::map<NodeId, std::pair<Fragment, MerkleProof>>> F_;
    std::map<RootHash, std::set<NodeId>> R_;
    std::map<NodeId, std::set<RootHash>> H_;
    std::map<RootHash, std::set<NodeId>> P_;
    std::map<NodeId, std::set<RootHash>> frag_hashes_from_;  // strict mode

    std::set<RootHash> proposed_;
    std::set<RootHash> frag_broadcast_;
    std::set<RootHash> frag_roots_sent_;
    bool seen_sender_fragment_ = false;
    bool done_ = false;
    std::optional<std::vector<uint8_t>> delivered_;
    std::optional<SimTime> delivered_at_;
    std::optional<SimTime> first_frag_time_;

    size_t cur_frag_bytes_ = 0;
    size_t peak_frag_bytes_ = 0;

    Outbox* out_ = nullptr;
    std::deque<Message> selfq_;
};

}  // namespace rbcast
