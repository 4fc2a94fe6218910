// Command-line front end: single runs, seed sweeps over a scenario file,
// and the codec benchmark. Data goes to stdout, logs to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rbcast/codec.hpp"
#include "rbcast/metrics.hpp"
#include "rbcast/simnet.hpp"

namespace {

using namespace rbcast;
using nlohmann::json;

enum class LogLevel { off = 0, info = 1, debug = 2 };

LogLevel log_level() {
    const char* v = std::getenv("RBCAST_LOG");
    if (!v) return LogLevel::off;
    std::string s(v);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::off;
}

void log(LogLevel lvl, const std::string& msg) {
    static LogLevel cur = log_level();
    if (int(lvl) <= int(cur) && cur != LogLevel::off)
        std::cerr << "[rbcast] " << msg << "\n";
}

Algo parse_algo(const std::string& s) {
    if (s == "bit") return Algo::bit;
    if (s == "sig") return Algo::sig;
    if (s == "baseline") return Algo::baseline;
    throw std::invalid_argument("unknown algo: " + s);
}

AdversaryConfig parse_adversary(const std::string& s) {
    AdversaryConfig a;
    if (s == "none") return a;
    if (s == "silent") {
        a.kind = AdversaryKind::silent;
        return a;
    }
    auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    const std::string arg =
        colon == std::string::npos ? "" : s.substr(colon + 1);
    if (head == "crash") {
        a.kind = AdversaryKind::crash;
        a.crash_step = std::stoull(arg);
        return a;
    }
    if (head == "equivocate") {
        if (arg == "two_way") a.kind = AdversaryKind::equivocate_two_way;
        else if (arg == "targeted") a.kind = AdversaryKind::equivocate_targeted;
        else if (arg == "per_recipient")
            a.kind = AdversaryKind::equivocate_per_recipient;
        else throw std::invalid_argument("unknown equivocation strategy: " +
                                         arg);
        return a;
    }
    if (head == "garble") {
        a.kind = AdversaryKind::garble;
        return a;
    }
    throw std::invalid_argument("unknown adversary: " + s);
}

DelayModel parse_delay(const std::string& s) {
    DelayModel d;
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("delay must be uniform:<d> or "
                                    "random:<Dmax>");
    const std::string head = s.substr(0, colon);
    const uint64_t arg = std::stoull(s.substr(colon + 1));
    if (head == "uniform") {
        d.kind = DelayModel::Kind::uniform;
        d.d = arg;
    } else if (head == "random") {
        d.kind = DelayModel::Kind::random;
        d.d_max = arg;
    } else {
        throw std::invalid_argument("unknown delay model: " + head);
    }
    return d;
}

json trace_header(const RunTrace& trace) {
    json j;
    j["schema"] = 1;
    j["config_digest"] = to_hex(config_digest(trace.config));
    j["trace_digest"] = to_hex(trace.trace_digest);
    j["algo"] = algo_name(trace.config.algo);
    j["n"] = trace.config.params.n;
    j["seed"] = trace.config.seed;
    return j;
}

void write_trace_jsonl(const RunTrace& trace, std::ostream& os) {
    os << trace_header(trace).dump() << "\n";
    for (const TraceEvent& ev : trace.events) {
        json j;
        j["time"] = ev.time;
        j["seq"] = ev.seq;
        j["from"] = ev.from;
        j["to"] = ev.to;
        j["kind"] = ev.kind;
        j["bytes"] = ev.bytes;
        j["accepted"] = ev.accepted;
        os << j.dump() << "\n";
    }
}

struct RunArgs {
    std::string algo = "bit";
    uint32_t n = 0;
    uint64_t msg_size = 0;
    std::string adversary = "none";
    uint64_t seed = 1;
    std::string delay = "uniform:1";
    uint64_t delta = 0;
    bool has_delta = false;
    bool strict_storage = false;
    bool piggyback = false;
    bool idealized_kappa = false;
    std::string out = ".";
    std::string format = "json";
};

RunConfig build_config(const RunArgs& a) {
    RunConfig c;
    c.seed = a.seed;
    c.algo = parse_algo(a.algo);
    c.params = c.algo == Algo::baseline ? ProtocolParams::low_rate(a.n)
                                        : ProtocolParams::high_rate(a.n);
    c.msg_size = a.msg_size;
    c.adversary = parse_adversary(a.adversary);
    c.delay = parse_delay(a.delay);
    c.flags.strict_storage = a.strict_storage;
    c.flags.piggyback = a.piggyback;
    c.flags.charge_idealized_kappa = a.idealized_kappa;
    if (a.has_delta) c.flags.delta = a.delta;
    c.validate();
    return c;
}

int cmd_run(const RunArgs& args) {
    RunConfig cfg;
    try {
        cfg = build_config(args);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    log(LogLevel::info, "running " + std::string(algo_name(cfg.algo)) +
                            " n=" + std::to_string(cfg.params.n));
    RunTrace trace = run(cfg);
    RunMetrics metrics = account(trace);

    std::filesystem::create_directories(args.out);
    {
        std::ofstream tf(std::filesystem::path(args.out) / "trace.jsonl");
        write_trace_jsonl(trace, tf);
    }
    json mj = metrics_to_json(metrics);
    mj["config_digest"] = to_hex(config_digest(cfg));
    mj["trace_digest"] = to_hex(trace.trace_digest);
    {
        std::ofstream mf(std::filesystem::path(args.out) / "metrics.json");
        mf << mj.dump(2) << "\n";
    }
    if (args.format == "csv") {
        std::cout << metrics_csv_header() << "\n"
                  << metrics_csv_row(trace, metrics) << "\n";
    } else {
        std::cout << mj.dump(2) << "\n";
    }
    if (!trace.violations.empty()) {
        for (const auto& v : trace.violations)
            std::cerr << "violation: " << v << "\n";
        return 3;
    }
    return 0;
}

struct SweepArgs {
    std::string scenario;
    uint64_t seed_start = 1;
    uint64_t seed_count = 0;
    unsigned jobs = 1;
};

RunConfig scenario_to_config(const json& sc) {
    if (!sc.is_object() || sc.value("schema", 0) != 1)
        throw std::invalid_argument("scenario must be an object with "
                                    "schema: 1");
    RunArgs a;
    a.algo = sc.at("algo").get<std::string>();
    a.n = sc.at("n").get<uint32_t>();
    a.msg_size = sc.at("msg_size").get<uint64_t>();
    if (sc.contains("adversary")) {
        const json& adv = sc.at("adversary");
        a.adversary = adv.at("kind").get<std::string>();
        if (adv.contains("args")) {
            const json& arg = adv.at("args");
            a.adversary += ":";
            a.adversary += arg.is_string() ? arg.get<std::string>()
                                           : std::to_string(
                                                 arg.get<uint64_t>());
        }
    }
    if (sc.contains("delay")) {
        const json& dl = sc.at("delay");
        a.delay = dl.at("kind").get<std::string>() + ":" +
                  std::to_string(dl.at("args").get<uint64_t>());
    }
    if (sc.contains("flags")) {
        const json& fl = sc.at("flags");
        a.strict_storage = fl.value("strict_storage", false);
        a.piggyback = fl.value("piggyback", false);
        a.idealized_kappa = fl.value("charge_idealized_kappa", false);
        if (fl.contains("delta") && !fl.at("delta").is_null()) {
            a.has_delta = true;
            a.delta = fl.at("delta").get<uint64_t>();
        }
    }
    return build_config(a);
}

int cmd_sweep(const SweepArgs& args) {
    json sc;
    RunConfig base;
    try {
        std::ifstream f(args.scenario);
        if (!f) throw std::invalid_argument("cannot open scenario file: " +
                                            args.scenario);
        f >> sc;
        base = scenario_to_config(sc);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    std::vector<RunConfig> configs;
    for (uint64_t i = 0; i < args.seed_count; ++i) {
        RunConfig c = base;
        c.seed = args.seed_start + i;
        configs.push_back(c);
    }
    log(LogLevel::info,
        "sweeping " + std::to_string(configs.size()) + " seeds");
    std::vector<RunTrace> traces = sweep(configs, args.jobs);

    std::cout << metrics_csv_header() << "\n";
    bool any_violation = false;
    for (const RunTrace& trace : traces) {
        RunMetrics m = account(trace);
        std::cout << metrics_csv_row(trace, m) << "\n";
        any_violation |= !trace.violations.empty();
    }
    return any_violation ? 3 : 0;
}

struct BenchArgs {
    std::vector<uint32_t> ns = {4, 7, 16, 31, 64};
    uint64_t input_size = 1u << 20;
    uint64_t reps = 10;
    uint64_t seed = 1;
};

void bench_rows(uint32_t n, const BenchSide& side, std::ostream& os) {
    auto row = [&](const char* op, const BenchStats& st) {
        os << n << ',' << side.k << ',' << op << ',' << st.mean_us << ','
           << st.p5_us << ',' << st.p95_us << "\n";
    };
    row("encode", side.encode);
    row("decode", side.decode);
}

int cmd_bench(const BenchArgs& args) {
    std::cout << "n,k,op,mean_us,p5_us,p95_us\n";
    for (uint32_t raw : args.ns) {
        // round up to the nearest valid 3t+1
        uint32_t n = raw;
        while (n < 4 || (n - 1) % 3 != 0) ++n;
        if (n != raw)
            log(LogLevel::info, "n=" + std::to_string(raw) + " rounded to " +
                                    std::to_string(n));
        BenchReport rep = bench_codec(
            ProtocolParams::low_rate(n), ProtocolParams::high_rate(n),
            args.input_size, args.reps, args.seed);
        bench_rows(n, rep.a, std::cout);
        bench_rows(n, rep.b, std::cout);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Byzantine reliable broadcast simulator"};
    app.require_subcommand(1);

    RunArgs ra;
    CLI::App* runc = app.add_subcommand("run", "execute one scenario");
    runc->add_option("--algo", ra.algo, "bit, sig, or baseline");
    runc->add_option("--n", ra.n, "node count (3t+1)")->required();
    runc->add_option("--msg-size", ra.msg_size, "message size in bytes")
        ->required();
    runc->add_option("--adversary", ra.adversary,
                     "none, silent, crash:<step>, equivocate:<strategy>, "
                     "garble");
    runc->add_option("--seed", ra.seed, "RNG seed");
    runc->add_option("--delay", ra.delay, "uniform:<d> or random:<Dmax>");
    auto* delta_opt =
        runc->add_option("--delta", ra.delta, "delivery gate in time units");
    runc->add_flag("--strict-storage", ra.strict_storage,
                   "single fragment-bearing root per peer");
    runc->add_flag("--piggyback", ra.piggyback,
                   "attach signatures to fragments (sig only)");
    runc->add_flag("--idealized-kappa", ra.idealized_kappa,
                   "charge kappa bits per signature in metrics");
    runc->add_option("--out", ra.out, "output directory");
    runc->add_option("--format", ra.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    SweepArgs sa;
    CLI::App* sweepc = app.add_subcommand("sweep", "seed sweep over a "
                                                   "scenario file");
    sweepc->add_option("--scenario", sa.scenario, "scenario JSON file")
        ->required();
    sweepc->add_option("--seed-start", sa.seed_start, "first seed");
    sweepc->add_option("--seeds", sa.seed_count, "number of seeds")
        ->required();
    sweepc->add_option("--jobs", sa.jobs, "parallel runs");

    BenchArgs ba;
    CLI::App* benchc = app.add_subcommand("bench", "codec benchmark CSV");
    benchc->add_option("--n", ba.ns, "node counts");
    benchc->add_option("--input-size", ba.input_size, "input bytes");
    benchc->add_option("--reps", ba.reps, "repetitions");
    benchc->add_option("--seed", ba.seed, "input seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    ra.has_delta = delta_opt->count() > 0;
    try {
        if (runc->parsed()) return cmd_run(ra);
        if (sweepc->parsed()) return cmd_sweep(sa);
        if (benchc->parsed()) return cmd_bench(ba);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
