#include "rbcast/baseline.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rbcast {

BaselineNode::BaselineNode(BaselineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.params.validate();
    if (cfg_.params.k != cfg_.params.t + 1)
        throw std::invalid_argument("BaselineNode: requires k = t+1");
    if (cfg_.self >= cfg_.params.n || cfg_.sender >= cfg_.params.n)
        throw std::invalid_argument("BaselineNode: node id out of range");
}

Outbox BaselineNode::start_broadcast(std::span<const uint8_t> m, SimTime now) {
    if (cfg_.self != cfg_.sender)
        throw std::invalid_argument("start_broadcast: not the sender");
    if (m.empty() || m.size() > cfg_.params.ell_max)
        throw std::invalid_argument("start_broadcast: bad message size");

    Outbox out;
    out_ = &out;
    auto frags = get_fragments(m, cfg_.params);
    RootHash h = get_merkle_root(frags);
    for (uint32_t j = 0; j < cfg_.params.n; ++j)
        send_msg(j, FragmentMessage{cfg_.instance, h, j, frags[j],
                                    get_merkle_proof(frags, j)});
    frag_roots_sent_.insert(h);
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

Outbox BaselineNode::on_message(NodeId from, const Message& msg, SimTime now,
                                bool* accepted) {
    Outbox out;
    out_ = &out;
    bool acc = false;
    if (instance_of(msg) == cfg_.instance)
        if (const auto* fm = std::get_if<FragmentMessage>(&msg))
            acc = handle_fragment(from, *fm, now);
    if (accepted) *accepted = acc;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

Outbox BaselineNode::on_timer(SimTime now) {
    Outbox out;
    out_ = &out;
    run_to_fixpoint(now);
    out_ = nullptr;
    return out;
}

bool BaselineNode::handle_fragment(NodeId from, const FragmentMessage& m,
                                   SimTime now) {
    const uint32_t j = m.leaf_index;
    if (from >= cfg_.params.n) return false;
    if (j != cfg_.self && j != from) return false;
    if (m.fragment.index != j) return false;
    if (!valid_merkle_proof(m.root, m.fragment, j, m.proof, cfg_.params.n))
        return false;

    R_[m.root].insert(from);
    auto& slot = F_[m.root];
    if (slot.find(j) == slot.end()) {
        cur_frag_bytes_ += m.fragment.payload.size();
        peak_frag_bytes_ = std::max(peak_frag_bytes_, cur_frag_bytes_);
        slot.emplace(j, std::make_pair(m.fragment, m.proof));
    }

    // echo own fragment once, on first receipt from the sender
    if (j == cfg_.self && from == cfg_.sender && !echoed_) {
        echoed_ = true;
        frag_roots_sent_.insert(m.root);
        broadcast_msg(FragmentMessage{cfg_.instance, m.root, cfg_.self,
                                      m.fragment, m.proof});
    }
    return true;
}

void BaselineNode::run_to_fixpoint(SimTime now) {
    for (;;) {
        bool changed = false;
        while (!selfq_.empty()) {
            Message m = std::move(selfq_.front());
            selfq_.pop_front();
            if (const auto* fm = std::get_if<FragmentMessage>(&m))
                handle_fragment(cfg_.self, *fm, now);
            changed = true;
        }
        if (!done_) {
            const uint32_t quorum = 2 * cfg_.params.t + 1;
            for (const auto& [h, slots] : F_) {
                if (slots.size() < quorum) continue;
                std::vector<Fragment> collected;
                for (const auto& [j, fp] : slots)
                    collected.push_back(fp.first);
                auto m = recover_message(collected, cfg_.params);
                if (!m.empty() && m.size() <= cfg_.params.ell_max) {
                    auto frags = get_fragments(m, cfg_.params);
                    if (get_merkle_root(frags) == h) {
                        delivered_ = std::move(m);
                        delivered_at_ = now;
                    }
                }
                done_ = true;
                changed = true;
                break;
            }
        }
        if (!changed) break;
    }
}

void BaselineNode::broadcast_msg(Message m) {
    selfq_.push_back(m);
    out_->entries.push_back({kBroadcast, std::move(m)});
}

void BaselineNode::send_msg(NodeId to, Message m) {
    if (to == cfg_.self)
        selfq_.push_back(std::move(m));
    else
        out_->entries.push_back({to, std::move(m)});
}

nlohmann::json BaselineNode::snapshot() const {
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
    j["peak_fragment_bytes"] = peak_frag_bytes_;
    return j;
}

Digest BaselineNode::state_digest() const {
    Hasher hs;
    hs.update_byte('E');
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
    hs.update_byte(echoed_ ? 1 : 0);
    hs.update_byte(done_ ? 1 : 0);
    if (delivered_) hs.update(sha256(*delivered_));
    return hs.finish();
}

}  // namespace rbcast
