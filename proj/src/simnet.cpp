#include "rbcast/simnet.hpp"

#include <algorithm>
#include <atomic>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "rbcast/baseline.hpp"
#include "rbcast/rbc_bit.hpp"
#include "rbcast/rbc_sig.hpp"

namespace rbcast {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// global message ceiling: honest nodes send O(n) messages each; the slack
// covers adversary scripts and top-ups
size_t message_ceiling(uint32_t n) { return 16ull * n * n + 64; }

struct PendingEvent {
    SimTime at = 0;
    uint64_t seq = 0;
    bool timer = false;
    NodeId from = 0;
    NodeId to = 0;
    Message msg;
};

struct EventOrder {
    bool operator()(const PendingEvent& a, const PendingEvent& b) const {
        return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
    }
};

using Machine = std::variant<BitNode, SigNode, BaselineNode>;

std::vector<uint8_t> make_payload(uint64_t seed, size_t size) {
    std::mt19937_64 rng(splitmix64(seed ^ 0x6d657373ull));
    std::vector<uint8_t> m(size);
    for (auto& b : m) b = uint8_t(rng());
    return m;
}

class Runner {
public:
    explicit Runner(const RunConfig& cfg)
        : cfg_(cfg),
          delay_rng_(splitmix64(cfg.seed ^ 0x64656c61ull)),
          adv_rng_(splitmix64(cfg.seed ^ 0x61647621ull)),
          provider_(std::make_shared<SimThresholdProvider>(
              cfg.params, splitmix64(cfg.seed ^ 0x73656372ull))) {
        cfg_.validate();
        const uint32_t n = cfg_.params.n;
        honest_.assign(n, true);
        for (NodeId id : byzantine_set()) honest_[id] = false;
        for (NodeId i = 0; i < n; ++i) {
            const bool needs_machine =
                honest_[i] ||
                (i == cfg_.sender &&
                 cfg_.adversary.kind == AdversaryKind::crash);
            if (needs_machine) machines_.emplace_back(make_machine(i));
            else machines_.emplace_back(std::nullopt);
        }
    }

    RunTrace go() {
        trace_.config = cfg_;
        trace_.honest = honest_;
        start();
        loop();
        finalize();
        return std::move(trace_);
    }

private:
    std::set<NodeId> byzantine_set() const {
        switch (cfg_.adversary.kind) {
            case AdversaryKind::none:
                return {};
            case AdversaryKind::garble:
                return {garbler_id()};
            default:
                return {cfg_.sender};
        }
    }

    NodeId garbler_id() const {
        return cfg_.sender == cfg_.params.n - 1 ? cfg_.params.n - 2
                                                : cfg_.params.n - 1;
    }

    Machine make_machine(NodeId i) const {
        switch (cfg_.algo) {
            case Algo::bit: {
                BitConfig c{cfg_.params, i, cfg_.sender, cfg_.instance,
                            cfg_.flags.strict_storage, cfg_.flags.delta, {}};
                return BitNode(std::move(c));
            }
            case Algo::sig: {
                SigConfig c{cfg_.params,          i,
                            cfg_.sender,          cfg_.instance,
                            cfg_.flags.piggyback, cfg_.flags.delta,
                            provider_,            {}};
                return SigNode(std::move(c));
            }
            case Algo::baseline:
                return BaselineNode(
                    BaselineConfig{cfg_.params, i, cfg_.sender,
                                   cfg_.instance});
        }
        throw std::logic_error("unreachable");
    }

    SimTime sample_delay() {
        if (cfg_.delay.kind == DelayModel::Kind::uniform) return cfg_.delay.d;
        return 1 + SimTime(delay_rng_() % cfg_.delay.d_max);
    }

    void schedule_send(NodeId from, NodeId to, Message msg, SimTime now) {
        if (!honest_[from] &&
            cfg_.adversary.kind == AdversaryKind::crash) {
            if (crash_sends_ >= cfg_.adversary.crash_step) return;
            ++crash_sends_;
        }
        ++scheduled_sends_;
        if (honest_[from]) {
            if (const auto* fm = std::get_if<FragmentMessage>(&msg))
                trace_.largest_honest_fragment_payload =
                    std::max(trace_.largest_honest_fragment_payload,
                             fm->fragment.payload.size());
        }
        queue_.push(PendingEvent{now + sample_delay(), next_seq_++, false,
                                 from, to, std::move(msg)});
    }

    void dispatch_outbox(NodeId from, Outbox&& out, SimTime now) {
        for (OutboxEntry& e : out.entries) {
            if (e.to == kBroadcast) {
                for (NodeId j = 0; j < cfg_.params.n; ++j)
                    if (j != from) schedule_send(from, j, e.msg, now);
            } else {
                schedule_send(from, e.to, std::move(e.msg), now);
            }
        }
        if (out.wake_at && *out.wake_at > now) {
            auto key = std::make_pair(from, *out.wake_at);
            if (wakes_.insert(key).second)
                queue_.push(PendingEvent{*out.wake_at, next_seq_++, true,
                                         from, from, {}});
        }
    }

    void start() {
        const SimTime t0 = 0;
        // a crashing sender runs the honest machine; its sends are truncated
        // by the budget inside schedule_send
        if (machines_[cfg_.sender]) {
            payload_ = make_payload(cfg_.seed, cfg_.msg_size);
            if (honest_[cfg_.sender]) trace_.broadcast_digest = sha256(payload_);
            Outbox out = std::visit(
                [&](auto& m) { return m.start_broadcast(payload_, t0); },
                *machines_[cfg_.sender]);
            dispatch_outbox(cfg_.sender, std::move(out), t0);
        }
        for (auto& [to, msg] : adversary_script())
            schedule_send(script_origin_, to, std::move(msg), t0);
    }

    std::vector<std::pair<NodeId, Message>> adversary_script();

    void loop() {
        while (!queue_.empty()) {
            PendingEvent ev = queue_.top();
            queue_.pop();
            if (trace_.events.size() > message_ceiling(cfg_.params.n)) {
                trace_.violations.push_back("message_ceiling_exceeded");
                break;
            }
            if (ev.timer) {
                if (machines_[ev.to]) {
                    Outbox out = std::visit(
                        [&](auto& m) { return m.on_timer(ev.at); },
                        *machines_[ev.to]);
                    dispatch_outbox(ev.to, std::move(out), ev.at);
                }
                continue;
            }
            bool accepted = true;
            if (machines_[ev.to]) {
                Outbox out = std::visit(
                    [&](auto& m) {
                        return m.on_message(ev.from, ev.msg, ev.at,
                                            &accepted);
                    },
                    *machines_[ev.to]);
                dispatch_outbox(ev.to, std::move(out), ev.at);
            }
            trace_.events.push_back(TraceEvent{
                ev.at, ev.seq, ev.from, ev.to, kind_name(ev.msg),
                wire_size(ev.msg), signature_bytes(ev.msg), accepted,
                honest_[ev.from]});
        }
    }

    void finalize();

    RunConfig cfg_;
    std::mt19937_64 delay_rng_;
    std::mt19937_64 adv_rng_;
    std::shared_ptr<SimThresholdProvider> provider_;
    std::vector<std::optional<Machine>> machines_;
    std::vector<bool> honest_;
    std::vector<uint8_t> payload_;
    std::priority_queue<PendingEvent, std::vector<PendingEvent>, EventOrder>
        queue_;
    std::set<std::pair<NodeId, SimTime>> wakes_;
    uint64_t next_seq_ = 0;
    uint64_t crash_sends_ = 0;
    uint64_t scheduled_sends_ = 0;
    NodeId script_origin_ = 0;
    RunTrace trace_;
};

std::vector<std::pair<NodeId, Message>> Runner::adversary_script() {
    std::vector<std::pair<NodeId, Message>> script;
    const uint32_t n = cfg_.params.n, t = cfg_.params.t;
    script_origin_ = cfg_.sender;

    auto equivocation_roots = [&](size_t variants) {
        // variant 0 is the base payload, others differ in the first byte
        std::vector<std::vector<Fragment>> frags;
        std::vector<RootHash> roots;
        std::vector<uint8_t> base = make_payload(cfg_.seed, cfg_.msg_size);
        for (size_t v = 0; v < variants; ++v) {
            std::vector<uint8_t> m = base;
            m[0] ^= uint8_t(v);
            frags.push_back(get_fragments(m, cfg_.params));
            roots.push_back(get_merkle_root(frags.back()));
        }
        return std::make_pair(std::move(frags), std::move(roots));
    };

    auto frag_msg = [&](const std::vector<Fragment>& fr, const RootHash& h,
                        uint32_t j) {
        return FragmentMessage{cfg_.instance, h, j, fr[j],
                               get_merkle_proof(fr, j)};
    };

    auto support_for_root = [&](const RootHash& root) -> std::optional<Message> {
        // the equivocating sender backs its primary root with its own
        // proposal / signature share
        if (cfg_.algo == Algo::bit)
            return Message{ProposalMessage{cfg_.instance, root}};
        if (cfg_.algo == Algo::sig)
            return Message{SignedProposalMessage{
                cfg_.instance, root,
                provider_->threshold_sign(cfg_.sender,
                                          SignSubject{cfg_.instance, root}),
                {}}};
        return std::nullopt;
    };

    std::vector<NodeId> recipients;
    for (NodeId i = 0; i < n; ++i)
        if (i != cfg_.sender) recipients.push_back(i);

    switch (cfg_.adversary.kind) {
        case AdversaryKind::none:
        case AdversaryKind::crash:
        case AdversaryKind::silent:
            break;

        case AdversaryKind::equivocate_two_way: {
            auto [frags, roots] = equivocation_roots(2);
            const size_t first = (2 * t + 1 + 1) / 2;
            for (size_t i = 0; i < recipients.size(); ++i) {
                size_t v = i < first ? 0 : 1;
                script.emplace_back(recipients[i],
                                    frag_msg(frags[v], roots[v],
                                             recipients[i]));
            }
            if (auto sup = support_for_root(roots[0]))
                for (NodeId r : recipients) script.emplace_back(r, *sup);
            break;
        }

        case AdversaryKind::equivocate_targeted: {
            auto [frags, roots] = equivocation_roots(2);
            // 2t recipients get root A, the last t get root B; together with
            // the sender's own support, A reaches the 2t+1 quorum
            for (size_t i = 0; i < recipients.size(); ++i) {
                size_t v = i < 2 * t ? 0 : 1;
                script.emplace_back(recipients[i],
                                    frag_msg(frags[v], roots[v],
                                             recipients[i]));
            }
            if (auto sup = support_for_root(roots[0]))
                for (NodeId r : recipients) script.emplace_back(r, *sup);
            // one B-group node additionally receives its A-fragment so the
            // quorum root can actually be reconstructed and delivered
            if (recipients.size() > 2 * t) {
                NodeId fed = recipients[2 * t];
                script.emplace_back(fed, frag_msg(frags[0], roots[0], fed));
            }
            break;
        }

        case AdversaryKind::equivocate_per_recipient: {
            auto [frags, roots] = equivocation_roots(recipients.size());
            for (size_t i = 0; i < recipients.size(); ++i)
                script.emplace_back(recipients[i],
                                    frag_msg(frags[i], roots[i],
                                             recipients[i]));
            if (auto sup = support_for_root(roots[0]))
                for (NodeId r : recipients) script.emplace_back(r, *sup);
            break;
        }

        case AdversaryKind::garble: {
            script_origin_ = garbler_id();
            for (NodeId v = 0; v < n; ++v) {
                if (v == script_origin_) continue;
                RootHash junk{};
                for (auto& b : junk) b = uint8_t(adv_rng_());
                Fragment f{v, {}};
                f.payload.resize(8);
                for (auto& b : f.payload) b = uint8_t(adv_rng_());
                script.emplace_back(
                    v, FragmentMessage{cfg_.instance, junk, v, f,
                                       MerkleProof{v, {}}});
                if (cfg_.algo == Algo::bit) {
                    script.emplace_back(
                        v, ProposalMessage{cfg_.instance, junk});
                } else if (cfg_.algo == Algo::sig) {
                    SignatureShare fake{script_origin_,
                                        SignSubject{cfg_.instance, junk},
                                        std::vector<uint8_t>(32)};
                    for (auto& b : fake.blob) b = uint8_t(adv_rng_());
                    script.emplace_back(
                        v, SignedProposalMessage{cfg_.instance, junk,
                                                 std::move(fake), {}});
                }
            }
            break;
        }
    }
    return script;
}

void Runner::finalize() {
    const uint32_t n = cfg_.params.n, t = cfg_.params.t;
    trace_.delivered.assign(n, std::nullopt);
    trace_.delivered_time.assign(n, std::nullopt);
    trace_.peak_fragment_bytes.assign(n, 0);
    trace_.fragment_roots_sent.assign(n, 0);
    trace_.committed_root.assign(n, std::nullopt);
    trace_.final_snapshots.resize(n);

    bool h_star_conflict = false;
    for (NodeId i = 0; i < n; ++i) {
        if (!machines_[i]) {
            trace_.final_snapshots[i] = nlohmann::json::object();
            continue;
        }
        std::visit(
            [&](auto& m) {
                if (m.delivered())
                    trace_.delivered[i] = sha256(*m.delivered());
                trace_.delivered_time[i] = m.delivered_at();
                trace_.peak_fragment_bytes[i] = m.peak_fragment_bytes();
                trace_.fragment_roots_sent[i] =
                    m.fragment_roots_sent().size();
                trace_.final_snapshots[i] = m.snapshot();
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                             SigNode>) {
                    trace_.committed_root[i] = m.committed_root();
                }
            },
            *machines_[i]);
    }
    (void)h_star_conflict;

    // property checks over honest nodes
    std::set<Digest> delivered_values;
    size_t honest_total = 0, honest_delivered = 0;
    for (NodeId i = 0; i < n; ++i) {
        if (!honest_[i]) continue;
        ++honest_total;
        if (trace_.delivered[i]) {
            ++honest_delivered;
            delivered_values.insert(*trace_.delivered[i]);
        }
    }
    if (delivered_values.size() > 1)
        trace_.violations.push_back("agreement_violation");
    if (honest_delivered > 0 && honest_delivered < honest_total)
        trace_.violations.push_back("totality_violation");
    if (honest_[cfg_.sender] && cfg_.msg_size > 0) {
        for (NodeId i = 0; i < n; ++i)
            if (honest_[i] && (!trace_.delivered[i] ||
                               *trace_.delivered[i] !=
                                   *trace_.broadcast_digest)) {
                trace_.violations.push_back("validity_violation");
                break;
            }
    }

    const size_t root_bound = cfg_.algo == Algo::sig ? 2 : 1;
    size_t double_broadcasters = 0;
    for (NodeId i = 0; i < n; ++i) {
        if (!honest_[i]) continue;
        if (trace_.fragment_roots_sent[i] > root_bound) {
            trace_.violations.push_back("fragment_root_bound_violation");
            break;
        }
        if (cfg_.algo == Algo::sig && trace_.fragment_roots_sent[i] == 2)
            ++double_broadcasters;
    }
    if (double_broadcasters > t)
        trace_.violations.push_back("double_broadcasters_exceed_t");

    if (cfg_.algo == Algo::sig) {
        std::set<RootHash> committed;
        for (NodeId i = 0; i < n; ++i)
            if (honest_[i] && trace_.committed_root[i])
                committed.insert(*trace_.committed_root[i]);
        if (committed.size() > 1)
            trace_.violations.push_back("h_star_disagreement");
    }

    for (const TraceEvent& ev : trace_.events)
        if (ev.honest_from && honest_[ev.to] && !ev.accepted) {
            trace_.violations.push_back("honest_to_honest_drop");
            break;
        }

    // trace digest over the processed event log plus outcomes
    Hasher hs;
    hs.update(config_digest(cfg_));
    for (const TraceEvent& ev : trace_.events) {
        hs.update_u64(ev.time);
        hs.update_u64(ev.seq);
        hs.update_u32(ev.from);
        hs.update_u32(ev.to);
        hs.update_byte(uint8_t(ev.kind[0]));
        hs.update_u64(ev.bytes);
        hs.update_byte(ev.accepted ? 1 : 0);
    }
    for (NodeId i = 0; i < n; ++i) {
        if (trace_.delivered[i]) hs.update(*trace_.delivered[i]);
        hs.update_byte(0xab);
    }
    trace_.trace_digest = hs.finish();
}

}  // namespace

void RunConfig::validate() const {
    params.validate();
    if (algo == Algo::baseline) {
        if (params.k != params.t + 1)
            throw std::invalid_argument("baseline requires k = t+1");
    } else if (params.k != 2 * params.t + 1) {
        throw std::invalid_argument("bit/sig require k = 2t+1");
    }
    if (sender >= params.n)
        throw std::invalid_argument("sender id out of range");
    if (msg_size == 0 || msg_size > params.ell_max)
        throw std::invalid_argument("msg_size must be in (0, ell_max]");
    if (delay.kind == DelayModel::Kind::uniform && delay.d == 0)
        throw std::invalid_argument("uniform delay must be positive");
    if (delay.kind == DelayModel::Kind::random && delay.d_max == 0)
        throw std::invalid_argument("d_max must be positive");
    if (adversary.kind == AdversaryKind::equivocate_per_recipient ||
        adversary.kind == AdversaryKind::equivocate_targeted ||
        adversary.kind == AdversaryKind::equivocate_two_way) {
        if (algo == Algo::baseline)
            throw std::invalid_argument(
                "equivocation adversaries are not supported for the "
                "baseline");
    }
    if (flags.piggyback && algo != Algo::sig)
        throw std::invalid_argument("piggyback applies to the sig protocol");
}

RunTrace run(const RunConfig& config) { return Runner(config).go(); }

std::optional<uint32_t> rounds_of(const RunTrace& trace) {
    const auto& delay = trace.config.delay;
    if (delay.kind != DelayModel::Kind::uniform)
        throw std::invalid_argument(
            "rounds_of is defined for uniform-delay schedules only");
    SimTime max_time = 0;
    for (NodeId i = 0; i < trace.config.params.n; ++i) {
        if (!trace.honest[i]) continue;
        if (!trace.delivered_time[i] || !trace.delivered[i])
            return std::nullopt;
        max_time = std::max(max_time, *trace.delivered_time[i]);
    }
    return uint32_t(max_time / delay.d);
}

std::vector<RunTrace> sweep(const std::vector<RunConfig>& configs,
                            unsigned jobs) {
    std::vector<RunTrace> out(configs.size());
    if (jobs <= 1) {
        for (size_t i = 0; i < configs.size(); ++i) out[i] = run(configs[i]);
        return out;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            out[i] = run(configs[i]);
        }
    };
    std::vector<std::thread> threads;
    unsigned count = std::min<unsigned>(jobs, unsigned(configs.size()));
    for (unsigned i = 0; i < count; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    return out;
}

Digest config_digest(const RunConfig& c) {
    Hasher h;
    h.update_u64(c.seed);
    h.update_u32(c.params.n);
    h.update_u32(c.params.t);
    h.update_u32(c.params.k);
    h.update_u64(c.params.ell_max);
    h.update_byte(uint8_t(c.algo));
    h.update_u64(c.msg_size);
    h.update_byte(uint8_t(c.adversary.kind));
    h.update_u64(c.adversary.crash_step);
    h.update_byte(uint8_t(c.delay.kind));
    h.update_u64(c.delay.d);
    h.update_u64(c.delay.d_max);
    h.update_byte(c.flags.strict_storage ? 1 : 0);
    h.update_byte(c.flags.piggyback ? 1 : 0);
    h.update_u64(c.flags.delta ? *c.flags.delta : 0);
    h.update_byte(c.flags.delta ? 1 : 0);
    h.update_byte(c.flags.charge_idealized_kappa ? 1 : 0);
    h.update_u64(c.instance);
    h.update_u32(c.sender);
    return h.finish();
}

const char* algo_name(Algo a) {
    switch (a) {
        case Algo::bit: return "bit";
        case Algo::sig: return "sig";
        case Algo::baseline: return "baseline";
    }
    return "?";
}

const char* adversary_name(AdversaryKind k) {
    switch (k) {
        case AdversaryKind::none: return "none";
        case AdversaryKind::silent: return "silent";
        case AdversaryKind::crash: return "crash";
        case AdversaryKind::equivocate_two_way: return "equivocate:two_way";
        case AdversaryKind::equivocate_targeted:
            return "equivocate:targeted";
        case AdversaryKind::equivocate_per_recipient:
            return "equivocate:per_recipient";
        case AdversaryKind::garble: return "garble";
    }
    return "?";
}

}  // namespace rbcast
