#include "rbcast/metrics.hpp"

#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace rbcast {

RunMetrics account(const RunTrace& trace) {
    const auto& cfg = trace.config;
    const uint32_t n = cfg.params.n;
    if (trace.honest.size() != n || trace.delivered.size() != n)
        throw std::invalid_argument("account: incomplete trace");

    RunMetrics m;
    m.bits_by_kind = {{"fragment", 0}, {"proposal", 0}, {"signature", 0}};
    const uint64_t kappa_bytes = cfg.params.kappa / 8;

    for (const TraceEvent& ev : trace.events) {
        ++m.messages_processed;
        if (!ev.accepted) {
            ++m.drops_total;
            if (ev.honest_from && trace.honest[ev.to])
                ++m.drops_honest_to_honest;
        }
        if (!ev.honest_from) continue;

        uint64_t sig = ev.sig_bytes;
        if (cfg.flags.charge_idealized_kappa && sig > 0) sig = kappa_bytes;
        const uint64_t payload = uint64_t(ev.bytes) - ev.sig_bytes;
        m.honest_bits_total += 8 * (payload + sig);
        m.bits_by_kind["signature"] += 8 * sig;
        m.bits_by_kind[std::string(ev.kind) == "fragment" ? "fragment"
                                                          : "proposal"] +=
            8 * payload;
    }

    // ell: the honest sender's message size, or for a Byzantine sender the
    // message size implied by the largest honest-sent fragment
    if (trace.honest[cfg.sender]) {
        m.ell = cfg.msg_size;
    } else if (trace.largest_honest_fragment_payload > 0) {
        uint64_t implied =
            uint64_t(trace.largest_honest_fragment_payload) * cfg.params.k;
        m.ell = implied > 8 ? implied - 8 : 1;
    }
    if (m.ell > 0)
        m.overhead_factor =
            double(m.honest_bits_total) / (8.0 * double(n) * double(m.ell));

    if (cfg.delay.kind == DelayModel::Kind::uniform)
        m.rounds = rounds_of(trace);

    m.per_node_peak_fragment_bytes = trace.peak_fragment_bytes;
    for (uint32_t i = 0; i < n; ++i) {
        if (!trace.honest[i]) continue;
        ++m.honest_total;
        if (trace.delivered[i]) ++m.honest_delivered;
    }
    m.violations = trace.violations;
    return m;
}

nlohmann::json metrics_to_json(const RunMetrics& m) {
    nlohmann::json j;
    j["schema"] = 1;
    j["honest_bits_total"] = m.honest_bits_total;
    j["bits_by_kind"] = m.bits_by_kind;
    if (m.overhead_factor)
        j["overhead_factor"] = *m.overhead_factor;
    else
        j["overhead_factor"] = nullptr;
    j["ell"] = m.ell;
    if (m.rounds)
        j["rounds"] = *m.rounds;
    else
        j["rounds"] = nullptr;
    j["per_node_peak_fragment_bytes"] = m.per_node_peak_fragment_bytes;
    j["messages_processed"] = m.messages_processed;
    j["drops_total"] = m.drops_total;
    j["drops_honest_to_honest"] = m.drops_honest_to_honest;
    j["honest_delivered"] = m.honest_delivered;
    j["honest_total"] = m.honest_total;
    j["violations"] = m.violations;
    return j;
}

std::string metrics_csv_header() {
    return "config_digest,algo,n,msg_size,adversary,seed,L,rounds,"
           "delivered,violations";
}

std::string metrics_csv_row(const RunTrace& trace, const RunMetrics& m) {
    const auto& cfg = trace.config;
    std::ostringstream os;
    os << to_hex(config_digest(cfg)) << ',' << algo_name(cfg.algo) << ','
       << cfg.params.n << ',' << cfg.msg_size << ','
       << adversary_name(cfg.adversary.kind) << ',' << cfg.seed << ',';
    if (m.overhead_factor) os << *m.overhead_factor;
    os << ',';
    if (m.rounds) os << *m.rounds;
    os << ',' << m.honest_delivered << '/' << m.honest_total << ',';
    // violations may contain commas in principle; quote the field
    os << '"';
    for (size_t i = 0; i < m.violations.size(); ++i) {
        if (i) os << ';';
        os << m.violations[i];
    }
    os << '"';
    return os.str();
}

}  // namespace rbcast
