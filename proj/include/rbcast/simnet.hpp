#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rbcast/messages.hpp"

namespace rbcast {

enum class Algo { bit, sig, baseline };

enum class AdversaryKind {
    none,
    silent,                    // Byzantine sender never sends
    crash,                     // sender stops after crash_step sends
    equivocate_two_way,        // ceil((2t+1)/2) recipients get root A, rest B
    equivocate_targeted,       // t recipients get root B; A reaches quorum
    equivocate_per_recipient,  // a distinct root per recipient
    garble,                    // non-sender node floods junk
};

struct AdversaryConfig {
    AdversaryKind kind = AdversaryKind::none;
    uint64_t crash_step = 0;
};

struct DelayModel {
    enum class Kind { uniform, random };
    Kind kind = Kind::uniform;
    SimTime d = 1;       // uniform delay
    SimTime d_max = 1;   // random delays drawn from [1, d_max]
};

struct RunFlags {
    bool strict_storage = false;
    bool piggyback = false;
    std::optional<SimTime> delta;
    /// Charge kappa/8 bytes per signature/share instead of the provider's
    /// actual serialized size.
    bool charge_idealized_kappa = false;
};

struct RunConfig {
    uint64_t seed = 1;
    ProtocolParams params;
    Algo algo = Algo::bit;
    size_t msg_size = 0;
    AdversaryConfig adversary;
    DelayModel delay;
    RunFlags flags;
    uint64_t instance = 1;
    NodeId sender = 0;

    void validate() const;
};

/// One processed delivery. Payload bytes are recorded by size only.
struct TraceEvent {
    SimTime time = 0;
    uint64_t seq = 0;
    NodeId from = 0;
    NodeId to = 0;
    const char* kind = "";
    size_t bytes = 0;
    size_t sig_bytes = 0;
    bool accepted = false;
    bool honest_from = false;
};

struct RunTrace {
    RunConfig config;
    std::vector<TraceEvent> events;
    std::vector<bool> honest;                         // per node
    std::vector<std::optional<Digest>> delivered;     // digest of payload
    std::vector<std::optional<SimTime>> delivered_time;
    std::vector<size_t> peak_fragment_bytes;
    std::vector<size_t> fragment_roots_sent;
    std::vector<std::optional<RootHash>> committed_root;  // sig protocol h*
    std::optional<Digest> broadcast_digest;  // honest sender's message
    size_t largest_honest_fragment_payload = 0;
    std::vector<std::string> violations;
    Digest trace_digest{};
    std::vector<nlohmann::json> final_snapshots;
};

/// Deterministic discrete-event execution of one broadcast instance: runs
/// to quiescence, records every send, and checks the reliable-broadcast
/// properties plus the per-protocol structural bounds at the end.
RunTrace run(const RunConfig& config);

/// Good-case round count: max honest delivery time divided by the uniform
/// delay. Throws for non-uniform delay models; nullopt when not every
/// honest node delivered.
std::optional<uint32_t> rounds_of(const RunTrace& trace);

/// Independent runs, optionally in parallel; results in config order.
std::vector<RunTrace> sweep(const std::vector<RunConfig>& configs,
                            unsigned jobs = 1);

/// Digest over the semantically relevant parts of a config; identical
/// configs produce identical run traces.
Digest config_digest(const RunConfig& config);

const char* algo_name(Algo a);
const char* adversary_name(AdversaryKind k);

}  // namespace rbcast
