#include "met/wire.hpp"

#include "met/base64.hpp"

namespace met {

namespace {

// Tolerant field access: wrong-type or missing fields fall back to a default
// instead of throwing, so a malformed peer message degrades into a rejected
// message rather than an exception in the service loop.
template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const Json::exception&) {
        return fallback;
    }
}

std::string get_str(const Json& j, const char* key) {
    return get_or<std::string>(j, key, "");
}

}  // namespace

Json to_json(const WireEvent& ev) {
    return Json{{"id", ev.id},
                {"type", ev.type},
                {"payload", ev.payload_b64},
                {"createdAt", ev.created_at_ns}};
}

WireEvent wire_event_from_json(const Json& j) {
    WireEvent ev;
    ev.id = get_str(j, "id");
    ev.type = get_str(j, "type");
    ev.payload_b64 = get_str(j, "payload");
    ev.created_at_ns = get_or<int64_t>(j, "createdAt", 0);
    return ev;
}

std::optional<Event> to_event(const WireEvent& wire) {
    std::optional<std::string> payload = base64_decode(wire.payload_b64);
    if (!payload) return std::nullopt;
    Event ev;
    ev.id = wire.id;
    ev.event_type = wire.type;
    ev.payload = std::move(*payload);
    ev.created_at_ns = wire.created_at_ns;
    return ev;
}

WireEvent from_event(const Event& ev) {
    WireEvent wire;
    wire.id = ev.id;
    wire.type = ev.event_type;
    wire.payload_b64 = base64_encode(ev.payload);
    wire.created_at_ns = ev.created_at_ns;
    return wire;
}

Json to_json(const EventFrame& f) {
    return Json{{"triggerId", f.trigger_id}, {"event", to_json(f.event)}};
}

std::optional<EventFrame> event_frame_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("triggerId") || !j.contains("event")) {
        return std::nullopt;
    }
    EventFrame f;
    f.trigger_id = get_str(j, "triggerId");
    f.event = wire_event_from_json(j["event"]);
    if (f.trigger_id.empty() || f.event.id.empty() || f.event.type.empty()) {
        return std::nullopt;
    }
    return f;
}

std::string frame_status_name(FrameStatus s) {
    switch (s) {
        case FrameStatus::kOk: return "ok";
        case FrameStatus::kBackpressure: return "backpressure";
        case FrameStatus::kUnknownTrigger: return "unknown_trigger";
        case FrameStatus::kUnknownType: return "unknown_type";
        case FrameStatus::kBadFrame: return "bad_frame";
    }
    return "bad_frame";
}

std::optional<FrameStatus> frame_status_from_name(const std::string& name) {
    if (name == "ok") return FrameStatus::kOk;
    if (name == "backpressure") return FrameStatus::kBackpressure;
    if (name == "unknown_trigger") return FrameStatus::kUnknownTrigger;
    if (name == "unknown_type") return FrameStatus::kUnknownType;
    if (name == "bad_frame") return FrameStatus::kBadFrame;
    return std::nullopt;
}

Json to_json(const FrameReply& r) {
    Json j{{"status", frame_status_name(r.status)},
           {"eventId", r.event_id},
           {"firing", r.firing}};
    if (r.status == FrameStatus::kBackpressure) {
        j["retryAfterMs"] = r.retry_after_ms;
    }
    return j;
}

std::optional<FrameReply> frame_reply_from_json(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    auto status = frame_status_from_name(get_str(j, "status"));
    if (!status) return std::nullopt;
    FrameReply r;
    r.status = *status;
    r.event_id = get_str(j, "eventId");
    r.firing = get_or<bool>(j, "firing", false);
    r.retry_after_ms = get_or<int>(j, "retryAfterMs", 0);
    return r;
}

InvocationPayload invocation_payload(const FiringRecord& record) {
    InvocationPayload p;
    p.trigger_id = record.trigger_id;
    p.case_index = record.case_index;
    p.fired_at_ns = record.fired_at_ns;
    p.fulfilling_event_id = record.fulfilling_event_id;
    for (const auto& [type, events] : record.consumed) {
        std::vector<WireEvent>& list = p.events[type];
        list.reserve(events.size());
        for (const Event& ev : events) list.push_back(from_event(ev));
    }
    return p;
}

Json to_json(const InvocationPayload& p) {
    Json events = Json::object();
    for (const auto& [type, list] : p.events) {
        Json arr = Json::array();
        for (const WireEvent& ev : list) arr.push_back(to_json(ev));
        events[type] = std::move(arr);
    }
    return Json{{"triggerId", p.trigger_id},
                {"caseIndex", p.case_index},
                {"events", std::move(events)},
                {"firedAt", p.fired_at_ns},
                {"fulfillingEventId", p.fulfilling_event_id}};
}

std::optional<InvocationPayload> invocation_payload_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("triggerId") || !j.contains("events") ||
        !j["events"].is_object()) {
        return std::nullopt;
    }
    InvocationPayload p;
    p.trigger_id = get_str(j, "triggerId");
    p.case_index = get_or<size_t>(j, "caseIndex", 0);
    p.fired_at_ns = get_or<int64_t>(j, "firedAt", 0);
    p.fulfilling_event_id = get_str(j, "fulfillingEventId");
    for (const auto& [type, arr] : j["events"].items()) {
        if (!arr.is_array()) return std::nullopt;
        std::vector<WireEvent>& list = p.events[type];
        for (const Json& item : arr) list.push_back(wire_event_from_json(item));
    }
    return p;
}

Json to_json(const SubscriptionAnnounce& s) {
    return Json{{"triggerId", s.trigger_id},
                {"eventTypes", s.event_types},
                {"replicaEndpoints", s.replica_endpoints}};
}

std::optional<SubscriptionAnnounce> subscription_from_json(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    SubscriptionAnnounce s;
    s.trigger_id = get_str(j, "triggerId");
    s.event_types =
        get_or<std::vector<std::string>>(j, "eventTypes", {});
    s.replica_endpoints =
        get_or<std::vector<std::string>>(j, "replicaEndpoints", {});
    if (s.trigger_id.empty() || s.event_types.empty() ||
        s.replica_endpoints.empty()) {
        return std::nullopt;
    }
    return s;
}

Json to_json(const TriggerRegistration& r) {
    return Json{{"rule", r.rule_text},
                {"functionUrl", r.function_url},
                {"partitions", r.partitions}};
}

std::optional<TriggerRegistration> registration_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("rule")) return std::nullopt;
    TriggerRegistration r;
    r.rule_text = get_str(j, "rule");
    r.function_url = get_str(j, "functionUrl");
    r.partitions = get_or<uint32_t>(j, "partitions", 1);
    return r;
}

Json to_json(const EventLogLine& l) {
    return Json{{"id", l.id},         {"type", l.type},
                {"createdAt", l.created_at_ns}, {"virtualMs", l.virtual_ms},
                {"seq", l.seq},       {"ackNs", l.ack_ns},
                {"deliveredTo", l.deliv_to}};
}

EventLogLine event_log_from_json(const Json& j) {
    EventLogLine l;
    l.id = get_str(j, "id");
    l.type = get_str(j, "type");
    l.created_at_ns = get_or<int64_t>(j, "createdAt", 0);
    l.virtual_ms = get_or<int64_t>(j, "virtualMs", 0);
    l.seq = get_or<uint64_t>(j, "seq", 0);
    l.ack_ns = get_or<int64_t>(j, "ackNs", 0);
    l.deliv_to = get_or<int>(j, "deliveredTo", 0);
    return l;
}

Json to_json(const InvokerLogLine& l) {
    Json j{{"kind", l.kind}, {"triggerId", l.trigger_id}};
    if (l.kind == "trigger") {
        j["rule"] = l.rule_text;
        j["functionUrl"] = l.function_url;
    } else if (l.kind == "arrival") {
        j["eventId"] = l.event_id;
        j["type"] = l.type;
        j["createdAt"] = l.created_at_ns;
        j["arrivalSeq"] = l.arrival_seq;
    } else if (l.kind == "firing") {
        j["caseIndex"] = l.case_index;
        j["fulfillingEventId"] = l.fulfilling_event_id;
        j["firedAt"] = l.fired_at_ns;
        j["events"] = l.consumed_ids;
    } else if (l.kind == "delivery") {
        j["fulfillingEventId"] = l.fulfilling_event_id;
        j["status"] = l.status;
        j["httpStatus"] = l.http_status;
    }
    return j;
}

InvokerLogLine invoker_log_from_json(const Json& j) {
    InvokerLogLine l;
    l.kind = get_str(j, "kind");
    l.trigger_id = get_str(j, "triggerId");
    l.rule_text = get_str(j, "rule");
    l.function_url = get_str(j, "functionUrl");
    l.event_id = get_str(j, "eventId");
    l.type = get_str(j, "type");
    l.created_at_ns = get_or<int64_t>(j, "createdAt", 0);
    l.arrival_seq = get_or<uint64_t>(j, "arrivalSeq", 0);
    l.case_index = get_or<size_t>(j, "caseIndex", 0);
    l.fulfilling_event_id = get_str(j, "fulfillingEventId");
    l.fired_at_ns = get_or<int64_t>(j, "firedAt", 0);
    l.consumed_ids =
        get_or<std::map<std::string, std::vector<std::string>>>(j, "events",
                                                                {});
    l.status = get_str(j, "status");
    l.http_status = get_or<int>(j, "httpStatus", 0);
    return l;
}

Json to_json(const SinkLogLine& l) {
    return Json{{"receivedAt", l.received_at_ns},
                {"triggerId", l.trigger_id},
                {"caseIndex", l.case_index},
                {"fulfillingEventId", l.fulfilling_event_id},
                {"fulfillingCreatedAt", l.fulfilling_created_at_ns},
                {"latencyNs", l.latency_ns},
                {"events", l.event_ids},
                {"respondedStatus", l.responded_status}};
}

SinkLogLine sink_log_from_json(const Json& j) {
    SinkLogLine l;
    l.received_at_ns = get_or<int64_t>(j, "receivedAt", 0);
    l.trigger_id = get_str(j, "triggerId");
    l.case_index = get_or<size_t>(j, "caseIndex", 0);
    l.fulfilling_event_id = get_str(j, "fulfillingEventId");
    l.fulfilling_created_at_ns = get_or<int64_t>(j, "fulfillingCreatedAt", 0);
    l.latency_ns = get_or<int64_t>(j, "latencyNs", 0);
    l.event_ids = get_or<std::map<std::string, std::vector<std::string>>>(
        j, "events", {});
    l.responded_status = get_or<int>(j, "respondedStatus", 200);
    return l;
}

Json to_json(const DeliveryLogLine& l) {
    return Json{{"eventId", l.event_id},
                {"triggerId", l.trigger_id},
                {"endpoint", l.endpoint},
                {"status", l.status}};
}

DeliveryLogLine delivery_log_from_json(const Json& j) {
    DeliveryLogLine l;
    l.event_id = get_str(j, "eventId");
    l.trigger_id = get_str(j, "triggerId");
    l.endpoint = get_str(j, "endpoint");
    l.status = get_str(j, "status");
    return l;
}

JsonlWriter::JsonlWriter(const std::string& path) { open(path); }

bool JsonlWriter::open(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    out_.open(path, std::ios::out | std::ios::trunc);
    return out_.is_open();
}

bool JsonlWriter::is_open() const { return out_.is_open(); }

void JsonlWriter::write(const Json& j) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!out_.is_open()) return;
    out_ << j.dump() << '\n';
    out_.flush();
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::vector<Json> lines;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (!j.is_discarded()) lines.push_back(std::move(j));
    }
    return lines;
}

}  // namespace met
