#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rbcast/simnet.hpp"

namespace rbcast {

/// Post-run accounting over one trace. Bits cover honest senders only;
/// self-addressed messages never reach the trace in the first place.
struct RunMetrics {
    uint64_t honest_bits_total = 0;
    std::map<std::string, uint64_t> bits_by_kind;  // fragment/proposal/signature
    /// honest_bits_total / (n * ell). For a Byzantine sender ell is derived
    /// from the largest fragment any honest node sent; nullopt when no
    /// honest node sent a fragment.
    std::optional<double> overhead_factor;
    uint64_t ell = 0;                     // message size used for the factor
    std::optional<uint32_t> rounds;       // uniform delay only
    std::vector<size_t> per_node_peak_fragment_bytes;
    uint64_t messages_processed = 0;
    uint64_t drops_total = 0;
    uint64_t drops_honest_to_honest = 0;  // must stay 0
    uint32_t honest_delivered = 0;
    uint32_t honest_total = 0;
    std::vector<std::string> violations;
};

/// Exact byte accounting from the serialized sizes recorded in the trace.
/// With charge_idealized_kappa set in the run flags, each signature or share
/// is charged kappa/8 bytes instead of its provider-specific size.
/// Throws std::invalid_argument on a trace without per-node results.
RunMetrics account(const RunTrace& trace);

nlohmann::json metrics_to_json(const RunMetrics& m);

/// Summary CSV used by sweeps; one row per run.
std::string metrics_csv_header();
std::string metrics_csv_row(const RunTrace& trace, const RunMetrics& m);

}  // namespace rbcast
