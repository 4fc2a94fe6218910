#include "rbcast/rbc_bit.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rbcast {

BitNode::BitNode(BitConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.params.validate();
    if (cfg_.self >= cfg_.params.n || cfg_.sender >= cfg_.params.n)
        throw std::invalid_argument("BitNode: node id out of range");
}

Outbox BitNode::start_broadcast(std::span<const uint8_t> m, SimTime now) {
    if (cfg_.self != cfg_.sender)
        throw std::invalid_argument("start_broadcast: not the sender");
    if (m.empty() || m.size() > cfg_.params.ell_max)
        throw std::invalid_argument("start_broadcast: bad message size");

    Outbox out;
    out_ = &out;
    auto frags = get_fragments(m, cfg_.params);
    RootHash h = get_merkle_root(frags);
    for (uint32_t j = 0; j < cfg_.params.n; ++j) {
        FragmentMessage fm{cfg_.instance, h, j, frags[j],
                           get_merkle_proof(frags, j)};
        send_msg(j, std::move(fm));
    }
    frag_roots_sent_.insert(h);
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

Outbox BitNode::on_message(NodeId from, const Message& msg, SimTime now,
                           bool* accepted) {
    Outbox out;
    out_ = &out;
    bool acc = dispatch(from, msg, now);
    if (accepted) *accepted = acc;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

Outbox BitNode::on_timer(SimTime now) {
    Outbox out;
    out_ = &out;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

bool BitNode::dispatch(NodeId from, const Message& msg, SimTime now) {
    if (instance_of(msg) != cfg_.instance) return false;
    if (const auto* fm = std::get_if<FragmentMessage>(&msg))
        return handle_fragment(from, *fm, now);
    if (const auto* pm = std::get_if<ProposalMessage>(&msg))
        return handle_proposal(from, *pm);
    return false;  // signed proposals belong to the other protocol
}

bool BitNode::handle_fragment(NodeId from, const FragmentMessage& m,
                              SimTime now) {
    const uint32_t j = m.leaf_index;
    if (from >= cfg_.params.n) return false;
    if (j != cfg_.self && j != from) return false;
    if (m.fragment.index != j) return false;

    auto hit = H_.find(from);
    const bool h_ok = hit == H_.end() || hit->second.size() < 2 ||
                      hit->second.count(m.root) > 0;
    if (!h_ok) return false;

    if (cfg_.strict_single_hash_fragments) {
        auto fit = frag_hashes_from_.find(from);
        if (fit != frag_hashes_from_.end() && !fit->second.empty() &&
            fit->second.count(m.root) == 0)
            return false;
    }

    if (!valid_merkle_proof(m.root, m.fragment, j, m.proof, cfg_.params.n))
        return false;

    H_[from].insert(m.root);
    if (cfg_.strict_single_hash_fragments)
        frag_hashes_from_[from].insert(m.root);
    R_[m.root].insert(from);
    auto& slot = F_[m.root];
    if (slot.find(j) == slot.end()) {
        cur_frag_bytes_ += m.fragment.payload.size();
        peak_frag_bytes_ = std::max(peak_frag_bytes_, cur_frag_bytes_);
        slot.emplace(j, std::make_pair(m.fragment, m.proof));
    }
    if (!first_frag_time_) first_frag_time_ = now;

    // only the first own-index fragment from the sender triggers a proposal;
    // other sender fragments (its own broadcast copy) must not consume it
    if (j == cfg_.self && from == cfg_.sender && !seen_sender_fragment_) {
        seen_sender_fragment_ = true;
        if (proposed_.count(m.root) == 0) {
            proposed_.insert(m.root);
            broadcast_msg(ProposalMessage{cfg_.instance, m.root});
        }
    }
    return true;
}

bool BitNode::handle_proposal(NodeId from, const ProposalMessage& m) {
    if (from >= cfg_.params.n) return false;
    auto hit = H_.find(from);
    const bool h_ok = hit == H_.end() || hit->second.size() < 2 ||
                      hit->second.count(m.root) > 0;
    if (!h_ok) return false;
    H_[from].insert(m.root);
    P_[m.root].insert(from);
    return true;
}

void BitNode::run_to_fixpoint(SimTime now) {
    for (;;) {
        bool changed = evaluate_state_actions(now);
        while (!selfq_.empty()) {
            Message m = std::move(selfq_.front());
            selfq_.pop_front();
            dispatch(cfg_.self, m, now);
            changed = true;
        }
        if (!changed) break;
    }
}

size_t BitNode::proposal_count(const RootHash& h) const {
    auto it = P_.find(h);
    return it == P_.end() ? 0 : it->second.size();
}

size_t BitNode::fragment_count(const RootHash& h) const {
    auto it = F_.find(h);
    return it == F_.end() ? 0 : it->second.size();
}

const Fragment* BitNode::own_fragment(const RootHash& h) const {
    auto it = F_.find(h);
    if (it == F_.end()) return nullptr;
    auto jt = it->second.find(cfg_.self);
    return jt == it->second.end() ? nullptr : &jt->second.first;
}

std::set<RootHash> BitNode::known_hashes() const {
    std::set<RootHash> all;
    for (const auto& [v, hs] : H_) all.insert(hs.begin(), hs.end());
    return all;
}

bool BitNode::evaluate_state_actions(SimTime now) {
    // h_max = argmax |P(h)| over all known hashes. Ties (including the
    // all-zero case before any proposal arrives) are resolved by evaluating
    // every candidate, smallest digest first.
    std::set<RootHash> known = known_hashes();
    if (known.empty()) return false;
    size_t best = 0;
    for (const RootHash& h : known) best = std::max(best, proposal_count(h));
    std::vector<RootHash> candidates;
    for (const RootHash& h : known)
        if (proposal_count(h) == best) candidates.push_back(h);

    const uint32_t quorum = 2 * cfg_.params.t + 1;
    bool changed = false;
    for (const RootHash& h : candidates) {
        if (proposal_count(h) >= quorum && frag_broadcast_.count(h) == 0) {
            if (const Fragment* own = own_fragment(h)) {
                const MerkleProof& proof =
                    F_.at(h).at(cfg_.self).second;
                frag_broadcast_.insert(h);
                frag_roots_sent_.insert(h);
                broadcast_msg(FragmentMessage{cfg_.instance, h, cfg_.self,
                                              *own, proof});
                changed = true;
            }
        }
        if (fragment_count(h) >= cfg_.params.t + 1 &&
            proposed_.count(h) == 0) {
            proposed_.insert(h);
            broadcast_msg(ProposalMessage{cfg_.instance, h});
            changed = true;
        }
        if (proposal_count(h) >= quorum && fragment_count(h) >= quorum &&
            !done_) {
            if (cfg_.delta && first_frag_time_ &&
                now < *first_frag_time_ + *cfg_.delta) {
                if (out_) out_->wake_at = *first_frag_time_ + *cfg_.delta;
            } else {
                try_deliver(h, now);
                changed = true;
            }
        }
    }
    return changed;
}

void BitNode::try_deliver(const RootHash& h, SimTime now) {
    std::vector<Fragment> collected;
    for (const auto& [j, fp] : F_.at(h)) collected.push_back(fp.first);

    std::vector<uint8_t> m =
        cfg_.recover_override ? cfg_.recover_override(collected, cfg_.params)
                              : recover_message(collected, cfg_.params);

    if (!m.empty() && m.size() <= cfg_.params.ell_max) {
        auto frags = get_fragments(m, cfg_.params);
        if (get_merkle_root(frags) == h) {
            const auto& r = R_.at(h);
            for (uint32_t j = 0; j < cfg_.params.n; ++j) {
                if (r.count(j)) continue;
                frag_roots_sent_.insert(h);
                send_msg(j, FragmentMessage{cfg_.instance, h, j, frags[j],
                                            get_merkle_proof(frags, j)});
            }
            delivered_ = std::move(m);
            delivered_at_ = now;
        }
    }
    done_ = true;  // regardless of the root check outcome
}

void BitNode::broadcast_msg(Message m) {
    selfq_.push_back(m);
    out_->entries.push_back({kBroadcast, std::move(m)});
}

void BitNode::send_msg(NodeId to, Message m) {
    if (to == cfg_.self)
        selfq_.push_back(std::move(m));
    else
        out_->entries.push_back({to, std::move(m)});
}

nlohmann::json BitNode::snapshot() const {
    nlohmann::json j;
    j["node"] = cfg_.self;
    j["done"] = done_;
    j["delivered"] =
        delivered_ ? to_hex(sha256(*delivered_)) : std::string();
    j["fragments"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [h, slots] : F_) m[to_hex(h)] = slots.size();
        return m;
    }();
    j["proposals"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [h, ids] : P_) m[to_hex(h)] = ids.size();
        return m;
    }();
    j["fragment_senders"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [h, ids] : R_) m[to_hex(h)] = ids.size();
        return m;
    }();
    j["hashes_per_peer"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [v, hs] : H_) m[std::to_string(v)] = hs.size();
        return m;
    }();
    j["peak_fragment_bytes"] = peak_frag_bytes_;
    return j;
}

Digest BitNode::state_digest() const {
    Hasher hs;
    hs.update_byte('B');
    for (const auto& [h, slots] : F_) {
        hs.update(h);
        for (const auto& [j, fp] : slots) {
            hs.update_u32(j);
            hs.update(fp.first.payload);
        }
    }
    for (const auto& [h, ids] : R_) {
        hs.update(h);
        for (NodeId v : ids) hs.update_u32(v);
    }
    for (const auto& [v, hset] : H_) {
        hs.update_u32(v);
        for (const RootHash& h : hset) hs.update(h);
    }
    for (const auto& [h, ids] : P_) {
        hs.update(h);
        for (NodeId v : ids) hs.update_u32(v);
    }
    for (const RootHash& h : proposed_) hs.update(h);
    hs.update_byte(0xfe);
    for (const RootHash& h : frag_broadcast_) hs.update(h);
    hs.update_byte(0xfe);
    for (const RootHash& h : frag_roots_sent_) hs.update(h);
    hs.update_byte(done_ ? 1 : 0);
    hs.update_byte(seen_sender_fragment_ ? 1 : 0);
    if (delivered_) hs.update(sha256(*delivered_));
    if (first_frag_time_) hs.update_u64(*first_frag_time_);
    return hs.finish();
}

}  // namespace rbcast
