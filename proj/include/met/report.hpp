#ifndef MET_REPORT_HPP
#define MET_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "met/wire.hpp"

namespace met {

struct Percentiles {
    double p50 = 0, p95 = 0, p99 = 0;
    uint64_t count = 0;
};

// Nearest-rank percentiles; the input is consumed (sorted in place).
Percentiles percentiles(std::vector<int64_t> values);

struct ReportInputs {
    std::string events_path;                 // generator event log
    std::vector<std::string> invoker_logs;   // one per invoker replica
    std::string sink_path;                   // sink firing log (optional)
    std::vector<std::string> delivery_logs;  // dispatcher logs (optional)
    // When no invoker logs exist, a rule given here lets the verdict replay
    // the generator event log directly (single trigger, single replica).
    std::string fallback_rule;
};

struct ReportResult {
    Json document;
    bool hard_failure = false;     // firings not explainable by events
    std::vector<std::string> problems;
};

// Crunches the logs: latency percentiles and CDF, throughput, invocation
// ratio, per-case and per-minute firing counts, and a replay-diff verdict —
// every logged firing must be reproduced by replaying the corresponding
// serialized arrival log through the reference evaluator.
ReportResult build_report(const ReportInputs& inputs);

// Writes document (and optional CDF CSV); returns false on I/O failure.
bool write_report(const ReportResult& result, const std::string& out_path,
                  const std::string& cdf_path = "");

}  // namespace met

#endif  // MET_REPORT_HPP
