#include "rbcast/rbc_sig.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rbcast {

SigNode::SigNode(SigConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.params.validate();
    if (cfg_.self >= cfg_.params.n || cfg_.sender >= cfg_.params.n)
        throw std::invalid_argument("SigNode: node id out of range");
    if (!cfg_.provider)
        throw std::invalid_argument("SigNode: threshold provider required");
}

Outbox SigNode::start_broadcast(std::span<const uint8_t> m, SimTime now) {
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

Outbox SigNode::on_message(NodeId from, const Message& msg, SimTime now,
                           bool* accepted) {
    Outbox out;
    out_ = &out;
    bool acc = dispatch(from, msg, now);
    if (accepted) *accepted = acc;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

Outbox SigNode::on_timer(SimTime now) {
    Outbox out;
    out_ = &out;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

bool SigNode::dispatch(NodeId from, const Message& msg, SimTime now) {
    if (instance_of(msg) != cfg_.instance) return false;
    if (const auto* fm = std::get_if<FragmentMessage>(&msg)) {
        bool acc = handle_fragment(from, *fm, now);
        // piggybacked signature material is processed independently of the
        // fragment's own acceptance
        if (fm->attached_share || fm->attached_sig)
            acc |= handle_share_or_sig(from, fm->root, fm->attached_share,
                                       fm->attached_sig);
        return acc;
    }
    if (const auto* sp = std::get_if<SignedProposalMessage>(&msg))
        return handle_share_or_sig(from, sp->root, sp->share, sp->sig);
    return false;  // plain proposals belong to the other protocol
}

bool SigNode::handle_fragment(NodeId from, const FragmentMessage& m,
                              SimTime now) {
    const uint32_t j = m.leaf_index;
    if (from >= cfg_.params.n) return false;
    if (j != cfg_.self && j != from) return false;
    if (m.fragment.index != j) return false;

    auto hit = H_.find(from);
    const bool h_ok = hit == H_.end() || hit->second.size() < 2 ||
                      hit->second.count(m.root) > 0;
    if (!h_ok) return false;
    if (!valid_merkle_proof(m.root, m.fragment, j, m.proof, cfg_.params.n))
        return false;

    H_[from].insert(m.root);
    R_[m.root].insert(from);
    auto& slot = F_[m.root];
    if (slot.find(j) == slot.end()) {
        cur_frag_bytes_ += m.fragment.payload.size();
        peak_frag_bytes_ = std::max(peak_frag_bytes_, cur_frag_bytes_);
        slot.emplace(j, std::make_pair(m.fragment, m.proof));
    }
    if (!first_frag_time_) first_frag_time_ = now;

    // only the first own-index fragment from the sender is signed; other
    // sender fragments (its own broadcast copy) must not consume the event
    if (j == cfg_.self && from == cfg_.sender && !seen_sender_fragment_) {
        seen_sender_fragment_ = true;
        if (!signed_root_) {
            signed_root_ = m.root;
            SignatureShare share = cfg_.provider->threshold_sign(
                cfg_.self, SignSubject{cfg_.instance, m.root});
            if (!cfg_.piggyback_signatures)
                broadcast_msg(SignedProposalMessage{cfg_.instance, m.root,
                                                    std::move(share), {}});
            frag_broadcast_.insert(m.root);
            frag_roots_sent_.insert(m.root);
            broadcast_fragment(m.root, cfg_.self, m.fragment, m.proof);
        }
    }
    return true;
}

bool SigNode::handle_share_or_sig(
    NodeId from, const RootHash& root,
    const std::optional<SignatureShare>& share,
    const std::optional<ThresholdSignature>& sig) {
    if (from >= cfg_.params.n) return false;
    const SignSubject subject{cfg_.instance, root};

    // A valid full signature is adopted unconditionally, bypassing the
    // per-peer hash limit.
    if (sig && cfg_.provider->valid_signature(subject, *sig)) {
        if (!h_star_) {
            sigma_star_ = *sig;
            h_star_ = root;
        } else if (*h_star_ != root) {
            // impossible without a forged signature; surfaced for tests
            conflicting_signature_seen_ = true;
        }
        return true;
    }

    if (share) {
        auto hit = H_.find(from);
        const bool h_ok = hit == H_.end() || hit->second.size() < 2 ||
                          hit->second.count(root) > 0;
        if (!h_ok) return false;
        if (share->signer != from ||
            !cfg_.provider->valid_share(subject, from, *share))
            return false;
        H_[from].insert(root);
        S_[root].emplace(from, *share);
        return true;
    }
    return false;
}

void SigNode::run_to_fixpoint(SimTime now) {
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

size_t SigNode::share_count(const RootHash& h) const {
    auto it = S_.find(h);
    return it == S_.end() ? 0 : it->second.size();
}

size_t SigNode::fragment_count(const RootHash& h) const {
    auto it = F_.find(h);
    return it == F_.end() ? 0 : it->second.size();
}

const Fragment* SigNode::own_fragment(const RootHash& h) const {
    auto it = F_.find(h);
    if (it == F_.end()) return nullptr;
    auto jt = it->second.find(cfg_.self);
    return jt == it->second.end() ? nullptr : &jt->second.first;
}

bool SigNode::evaluate_state_actions(SimTime now) {
    const uint32_t quorum = 2 * cfg_.params.t + 1;
    bool changed = false;

    // h_max = argmax |S(h)| over all known hashes
    if (!h_star_) {
        std::set<RootHash> known;
        for (const auto& [v, hs] : H_) known.insert(hs.begin(), hs.end());
        size_t best = 0;
        for (const RootHash& h : known) best = std::max(best, share_count(h));
        if (best >= quorum) {
            for (const RootHash& h : known) {
                if (share_count(h) != best) continue;
                std::vector<SignatureShare> shares;
                for (const auto& [v, s] : S_.at(h)) shares.push_back(s);
                sigma_star_ = cfg_.provider->compute_signature(shares);
                h_star_ = h;
                changed = true;
                break;
            }
        }
    }

    if (h_star_ && frag_broadcast_.count(*h_star_) == 0) {
        if (const Fragment* own = own_fragment(*h_star_)) {
            const MerkleProof& proof = F_.at(*h_star_).at(cfg_.self).second;
            frag_broadcast_.insert(*h_star_);
            frag_roots_sent_.insert(*h_star_);
            broadcast_fragment(*h_star_, cfg_.self, *own, proof);
            changed = true;
        }
    }

    if (h_star_ && fragment_count(*h_star_) >= quorum && !done_) {
        if (cfg_.delta && first_frag_time_ &&
            now < *first_frag_time_ + *cfg_.delta) {
            if (out_) out_->wake_at = *first_frag_time_ + *cfg_.delta;
        } else {
            if (!cfg_.piggyback_signatures)
                broadcast_msg(SignedProposalMessage{cfg_.instance, *h_star_,
                                                    {}, *sigma_star_});
            try_deliver(now);
            changed = true;
        }
    }
    return changed;
}

void SigNode::try_deliver(SimTime now) {
    const RootHash h = *h_star_;
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
                broadcast_fragment(h, j, frags[j], get_merkle_proof(frags, j),
                                   j);
            }
            delivered_ = std::move(m);
            delivered_at_ = now;
        }
    }
    done_ = true;
}

void SigNode::broadcast_fragment(const RootHash& h, uint32_t j,
                                 const Fragment& f, const MerkleProof& proof,
                                 std::optional<NodeId> to) {
    FragmentMessage fm{cfg_.instance, h, j, f, proof};
    if (cfg_.piggyback_signatures) {
        // share while uncommitted, full signature afterwards
        if (!h_star_) {
            if (signed_root_ && *signed_root_ == h)
                fm.attached_share = cfg_.provider->threshold_sign(
                    cfg_.self, SignSubject{cfg_.instance, h});
        } else {
            fm.attached_sig = sigma_star_;
        }
    }
    if (to)
        send_msg(*to, std::move(fm));
    else
        broadcast_msg(std::move(fm));
}

void SigNode::broadcast_msg(Message m) {
    selfq_.push_back(m);
    out_->entries.push_back({kBroadcast, std::move(m)});
}

void SigNode::send_msg(NodeId to, Message m) {
    if (to == cfg_.self)
        selfq_.push_back(std::move(m));
    else
        out_->entries.push_back({to, std::move(m)});
}

nlohmann::json SigNode::snapshot() const {
    nlohmann::json j;
    j["node"] = cfg_.self;
    j["done"] = done_;
    j["delivered"] =
        delivered_ ? to_hex(sha256(*delivered_)) : std::string();
    j["h_star"] = h_star_ ? to_hex(*h_star_) : std::string();
    j["fragments"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [h, slots] : F_) m[to_hex(h)] = slots.size();
        return m;
    }();
    j["shares"] = [&] {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [h, ss] : S_) m[to_hex(h)] = ss.size();
        return m;
    }();
    j["peak_fragment_bytes"] = peak_frag_bytes_;
    return j;
}

Digest SigNode::state_digest() const {
    Hasher hs;
    hs.update_byte('S');
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
    for (const auto& [h, ss] : S_) {
        hs.update(h);
        for (const auto& [v, s] : ss) hs.update_u32(v);
    }
    if (h_star_) hs.update(*h_star_);
    if (signed_root_) hs.update(*signed_root_);
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
