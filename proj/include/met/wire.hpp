// ============================================================================
// met/wire.hpp — JSON wire and log formats
// ============================================================================
//
// Everything that crosses a process boundary goes through here: the event
// frame bodies on the dispatcher->invoker connection, the HTTP invocation
// payload, subscription/registration bodies, and the JSON-lines records the
// services and harness write. Payload bytes travel base64-encoded inside
// JSON bodies.
//
// ============================================================================

#ifndef MET_WIRE_HPP
#define MET_WIRE_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "met/event.hpp"
#include "met/trigger.hpp"

namespace met {

using Json = nlohmann::json;

// ── Events on the wire ──────────────────────────────────────────────────────

// Event as carried in JSON bodies; payload stays base64 so the dispatcher
// forwards it untouched.
struct WireEvent {
    std::string id;
    std::string type;
    std::string payload_b64;
    int64_t created_at_ns = 0;
};

Json to_json(const WireEvent& ev);
WireEvent wire_event_from_json(const Json& j);

// Decodes the payload; returns nullopt on bad base64.
std::optional<Event> to_event(const WireEvent& wire);
WireEvent from_event(const Event& ev);

// ── Dispatcher -> invoker frames ────────────────────────────────────────────

struct EventFrame {
    std::string trigger_id;
    WireEvent event;
};

enum class FrameStatus : uint8_t {
    kOk,
    kBackpressure,
    kUnknownTrigger,
    kUnknownType,
    kBadFrame,
};

struct FrameReply {
    FrameStatus status = FrameStatus::kOk;
    std::string event_id;
    bool firing = false;
    int retry_after_ms = 0;  // backpressure only
};

std::string frame_status_name(FrameStatus s);
std::optional<FrameStatus> frame_status_from_name(const std::string& name);

Json to_json(const EventFrame& f);
std::optional<EventFrame> event_frame_from_json(const Json& j);
Json to_json(const FrameReply& r);
std::optional<FrameReply> frame_reply_from_json(const Json& j);

// ── Function invocation payload ─────────────────────────────────────────────

// Mirrors FiringRecord: the consumed events grouped by type, the satisfied
// case, and the id of the event whose arrival completed it.
struct InvocationPayload {
    std::string trigger_id;
    size_t case_index = 0;
    std::map<std::string, std::vector<WireEvent>> events;
    int64_t fired_at_ns = 0;
    std::string fulfilling_event_id;
};

InvocationPayload invocation_payload(const FiringRecord& record);
Json to_json(const InvocationPayload& p);
std::optional<InvocationPayload> invocation_payload_from_json(const Json& j);

// ── Admin bodies ────────────────────────────────────────────────────────────

struct SubscriptionAnnounce {
    std::string trigger_id;
    std::vector<std::string> event_types;
    std::vector<std::string> replica_endpoints;  // host:port frame listeners
};

Json to_json(const SubscriptionAnnounce& s);
std::optional<SubscriptionAnnounce> subscription_from_json(const Json& j);

struct TriggerRegistration {
    std::string rule_text;
    std::string function_url;
    uint32_t partitions = 1;
};

Json to_json(const TriggerRegistration& r);
std::optional<TriggerRegistration> registration_from_json(const Json& j);

// ── JSON-lines log records ──────────────────────────────────────────────────

// One line per event the generator sent and got acked.
struct EventLogLine {
    std::string id;  // dispatcher-assigned
    std::string type;
    int64_t created_at_ns = 0;
    int64_t virtual_ms = 0;  // position in the scenario schedule
    uint64_t seq = 0;        // send order
    int64_t ack_ns = 0;      // producer-observed ack latency
    int deliv_to = 0;
};

// Invoker log lines share one shape distinguished by `kind`:
//   trigger  — handler creation (carries rule text)
//   arrival  — an ingested event, in per-trigger serialized order
//   firing   — a fulfillment (case index + consumed ids by type)
//   delivery — result of the HTTP function invocation
struct InvokerLogLine {
    std::string kind;
    std::string trigger_id;
    // trigger
    std::string rule_text;
    std::string function_url;
    // arrival
    std::string event_id;
    std::string type;
    int64_t created_at_ns = 0;
    uint64_t arrival_seq = 0;
    // firing
    size_t case_index = 0;
    std::string fulfilling_event_id;
    int64_t fired_at_ns = 0;
    std::map<std::string, std::vector<std::string>> consumed_ids;
    // delivery
    std::string status;
    int http_status = 0;
};

struct SinkLogLine {
    int64_t received_at_ns = 0;
    std::string trigger_id;
    size_t case_index = 0;
    std::string fulfilling_event_id;
    int64_t fulfilling_created_at_ns = 0;
    int64_t latency_ns = 0;
    std::map<std::string, std::vector<std::string>> event_ids;
    int responded_status = 200;
};

struct DeliveryLogLine {
    std::string event_id;
    std::string trigger_id;
    std::string endpoint;
    std::string status;  // frame_status_name or "connect_error"
};

Json to_json(const EventLogLine& l);
EventLogLine event_log_from_json(const Json& j);
Json to_json(const InvokerLogLine& l);
InvokerLogLine invoker_log_from_json(const Json& j);
Json to_json(const SinkLogLine& l);
SinkLogLine sink_log_from_json(const Json& j);
Json to_json(const DeliveryLogLine& l);
DeliveryLogLine delivery_log_from_json(const Json& j);

// ── JSONL I/O ───────────────────────────────────────────────────────────────

// Line-buffered, thread-safe JSONL writer; each line is flushed so logs
// survive SIGTERM.
class JsonlWriter {
  public:
    JsonlWriter() = default;
    explicit JsonlWriter(const std::string& path);

    bool open(const std::string& path);
    bool is_open() const;
    void write(const Json& j);

  private:
    std::mutex mu_;
    std::ofstream out_;
};

std::vector<Json> read_jsonl(const std::string& path);

}  // namespace met

#endif  // MET_WIRE_HPP
