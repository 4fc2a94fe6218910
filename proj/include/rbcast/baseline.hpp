#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "rbcast/messages.hpp"

namespace rbcast {

struct BaselineConfig {
    ProtocolParams params;   // k = t+1
    NodeId self = 0;
    NodeId sender = 0;
    uint64_t instance = 0;
};

/// Echo-style reference protocol over a (n, t+1) code, kept as a measurement
/// baseline: the sender disperses fragments with proofs, every node echoes
/// its fragment to all, and a node delivers after 2t+1 consistent echoes
/// plus a recovery and root recheck. Byzantine-sender hardening is out of
/// its scope.
class BaselineNode {
public:
    explicit BaselineNode(BaselineConfig cfg);

    Outbox start_broadcast(std::span<const uint8_t> m, SimTime now = 0);
    Outbox on_message(NodeId from, const Message& msg, SimTime now,
                      bool* accepted = nullptr);
    Outbox on_timer(SimTime now);

    const std::optional<std::vector<uint8_t>>& delivered() const {
        return delivered_;
    }
    std::optional<SimTime> delivered_at() const { return delivered_at_; }
    bool done() const { return done_; }

    size_t current_fragment_bytes() const { return cur_frag_bytes_; }
    size_t peak_fragment_bytes() const { return peak_frag_bytes_; }
    const std::set<RootHash>& fragment_roots_sent() const {
        return frag_roots_sent_;
    }

    nlohmann::json snapshot() const;
    Digest state_digest() const;

private:
    bool handle_fragment(NodeId from, const FragmentMessage& m, SimTime now);
    void run_to_fixpoint(SimTime now);
    void broadcast_msg(Message m);
    void send_msg(NodeId to, Message m);

    BaselineConfig cfg_;

    std::map<RootHash, std::map<NodeId, std::pair<Fragment, MerkleProof>>> F_;
    std::map<RootHash, std::set<NodeId>> R_;
    std::set<RootHash> frag_roots_sent_;
    bool echoed_ = false;
    bool done_ = false;
    std::optional<std::vector<uint8_t>> delivered_;
    std::optional<SimTime> delivered_at_;

    size_t cur_frag_bytes_ = 0;
    size_t peak_frag_bytes_ = 0;

    Outbox* out_ = nullptr;
    std::deque<Message> selfq_;
};

}  // namespace rbcast
