#ifndef MET_EVENT_HPP
#define MET_EVENT_HPP

#include <cstdint>
#include <string>

namespace met {

// A typed, timestamped unit of input. The payload is opaque bytes; the
// engine never inspects or reorders by it.
struct Event {
    std::string id;             // unique within a run, dispatcher-assigned
    std::string event_type;     // [a-zA-Z]+
    std::string payload;        // raw bytes (base64 only on the wire)
    int64_t created_at_ns = 0;  // producer wall clock
    uint64_t arrival_seq = 0;   // per-handler, assigned at ingest
};

bool valid_event_type(std::string_view type);

}  // namespace met

#endif  // MET_EVENT_HPP
