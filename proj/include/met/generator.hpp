#ifndef MET_GENERATOR_HPP
#define MET_GENERATOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "met/scenario.hpp"

namespace met {

struct GeneratorOptions {
    std::vector<std::string> dispatchers;  // base URLs, round-robin
    std::string out_path;                  // event log JSONL; empty disables
    bool deterministic = true;
    double compress = 1.0;  // schedule time is divided by this
    uint64_t seed = 1;
    bool collect_acks = false;  // keep per-event ack latencies in memory
};

struct GeneratorReport {
    uint64_t sent = 0;
    uint64_t acked = 0;       // HTTP 200
    uint64_t failed = 0;      // transport errors / non-200, non-503
    uint64_t backpressured = 0;  // HTTP 503
    int64_t wall_start_ns = 0;
    int64_t wall_end_ns = 0;
    std::vector<int64_t> ack_ns;  // when collect_acks

    double duration_seconds() const {
        return static_cast<double>(wall_end_ns - wall_start_ns) / 1e9;
    }
    double throughput_rps() const {
        const double d = duration_seconds();
        return d > 0 ? static_cast<double>(acked) / d : 0.0;
    }
};

// Emits the scenario's event streams as live traffic against the dispatchers
// and records every sent event. Deterministic mode paces the fixed schedule
// on one thread (arrival order equals schedule order); stochastic mode runs
// the configured virtual users with jittered gaps. Aborts (returns early,
// report flagged by failed counts) only on transport errors.
GeneratorReport generate(const Scenario& scenario, const GeneratorOptions& opts);

// Maximum-rate open-loop load for throughput steps: `clients` keep-alive
// connections, each cycling through `types`, posting `payload_bytes` random
// payloads for `duration_s`.
struct BlastOptions {
    std::vector<std::string> dispatchers;
    std::vector<std::string> types = {"a"};
    size_t payload_bytes = 1024;
    int clients = 8;
    double duration_s = 60.0;
    uint64_t seed = 1;
};

struct BlastResult {
    uint64_t sent = 0;
    uint64_t acked = 0;
    uint64_t failed = 0;
    double duration_s = 0.0;

    double rps() const { return duration_s > 0 ? acked / duration_s : 0.0; }
};

BlastResult blast(const BlastOptions& opts);

}  // namespace met

#endif  // MET_GENERATOR_HPP
