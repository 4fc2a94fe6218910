#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "rbcast/messages.hpp"

namespace rbcast {

struct SigConfig {
    ProtocolParams params;
    NodeId self = 0;
    NodeId sender = 0;
    uint64_t instance = 0;
    /// Append shares/signatures to fragment messages and omit standalone
    /// signed proposals, including the pre-delivery signature broadcast.
    bool piggyback_signatures = false;
    std::optional<SimTime> delta;
    std::shared_ptr<const ThresholdProvider> provider;
    std::function<std::vector<uint8_t>(const std::vector<Fragment>&,
                                       const ProtocolParams&)>
        recover_override;
};

/// State machine for one node of the threshold-signature protocol. Commits
/// to a single root hash h* once a threshold signature for it exists.
class SigNode {
public:
    explicit SigNode(SigConfig cfg);

    Outbox start_broadcast(std::span<const uint8_t> m, SimTime now = 0);
    Outbox on_message(NodeId from, const Message& msg, SimTime now,
                      bool* accepted = nullptr);
    Outbox on_timer(SimTime now);

    const std::optional<std::vector<uint8_t>>& delivered() const {
        return delivered_;
    }
    std::optional<SimTime> delivered_at() const { return delivered_at_; }
    bool done() const { return done_; }

    const std::optional<RootHash>& committed_root() const { return h_star_; }
    /// Two valid signatures over different roots were observed; impossible
    /// unless the provider is forgeable.
    bool conflicting_signature_seen() const {
        return conflicting_signature_seen_;
    }

    size_t current_fragment_bytes() const { return cur_frag_bytes_; }
    size_t peak_fragment_bytes() const { return peak_frag_bytes_; }

    /// Honest nodes send fragments for at most two distinct roots.
    const std::set<RootHash>& fragment_roots_sent() const {
        return frag_roots_sent_;
    }

    nlohmann::json snapshot() const;
    Digest state_digest() const;

    const SigConfig& config() const { return cfg_; }

private:
    bool handle_fragment(NodeId from, const FragmentMessage& m, SimTime now);
    bool handle_share_or_sig(NodeId from, const RootHash& root,
                             const std::optional<SignatureShare>& share,
                             const std::optional<ThresholdSignature>& sig);
    bool dispatch(NodeId from, const Message& msg, SimTime now);
    void run_to_fixpoint(SimTime now);
    bool evaluate_state_actions(SimTime now);
    void try_deliver(SimTime now);
    void broadcast_fragment(const RootHash& h, uint32_t j, const Fragment& f,
                            const MerkleProof& proof,
                            std::optional<NodeId> to = {});

    void broadcast_msg(Message m);
    void send_msg(NodeId to, Message m);

    size_t share_count(const RootHash& h) const;
    size_t fragment_count(const RootHash& h) const;
    const Fragment* own_fragment(const RootHash& h) const;

    SigConfig cfg_;

    std::map<RootHash, std::map<NodeId, std::pair<Fragment, MerkleProof>>> F_;
    std::map<RootHash, std::set<NodeId>> R_;
    std::map<NodeId, std::set<RootHash>> H_;
    std::map<RootHash, std::map<NodeId, SignatureShare>> S_;

    std::optional<RootHash> h_star_;
    std::optional<ThresholdSignature> sigma_star_;
    std::optional<RootHash> signed_root_;   // this node signs at most once
    std::set<RootHash> frag_broadcast_;     // own fragment broadcast per root
    std::set<RootHash> frag_roots_sent_;
    bool seen_sender_fragment_ = false;
    bool done_ = false;
    bool conflicting_signature_seen_ = false;
    std::optional<std::vector<uint8_t>> delivered_;
    std::optional<SimTime> delivered_at_;
    std::optional<SimTime> first_frag_time_;

    size_t cur_frag_bytes_ = 0;
    size_t peak_frag_bytes_ = 0;

    Outbox* out_ = nullptr;
    std::deque<Message> selfq_;
};

}  // namespace rbcast
