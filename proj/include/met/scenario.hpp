#ifndef MET_SCENARIO_HPP
#define MET_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "met/wire.hpp"

namespace met {

struct EventStream {
    std::string event_type;
    double rate_per_minute = 0.0;
    size_t payload_bytes = 0;
    int virtual_users = 1;
};

struct ScenarioTrigger {
    std::string rule_text;
    std::string function_url;  // empty: the harness fills in its sink
    uint32_t partitions = 1;
};

struct ScenarioTopology {
    int dispatchers = 1;
    int invokers = 1;
};

struct Scenario {
    std::string name;
    std::vector<EventStream> streams;
    int64_t duration_seconds = 60;
    std::vector<ScenarioTrigger> triggers;
    ScenarioTopology topology;
};

// Throws std::invalid_argument on constraint violations (negative rates,
// non-positive duration, bad event types).
Scenario scenario_from_json(const Json& j);
Json to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

// One planned event of the deterministic schedule.
struct ScheduledEvent {
    int64_t virtual_ms = 0;
    size_t stream_index = 0;
    uint64_t k = 0;  // per-stream ordinal
};

// Fixed interleaving: stream i emits its k-th event at (k+1)*60000/rate ms,
// events up to and including the duration boundary, ordered by virtual time
// with ties broken by stream order then ordinal.
std::vector<ScheduledEvent> deterministic_schedule(const Scenario& s);

}  // namespace met

#endif  // MET_SCENARIO_HPP
