#include "met/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "met/event.hpp"

namespace met {

Scenario scenario_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("scenario: not an object");
    Scenario s;
    s.name = j.value("name", "scenario");
    s.duration_seconds = j.value("durationSeconds", int64_t{60});
    if (s.duration_seconds <= 0) {
        throw std::invalid_argument("scenario: durationSeconds must be > 0");
    }
    for (const Json& stream_json : j.value("eventStreams", Json::array())) {
        EventStream stream;
        stream.event_type = stream_json.value("eventType", "");
        stream.rate_per_minute = stream_json.value("ratePerMinute", 0.0);
        stream.payload_bytes = stream_json.value("payloadBytes", size_t{0});
        stream.virtual_users = stream_json.value("virtualUsers", 1);
        if (!valid_event_type(stream.event_type)) {
            throw std::invalid_argument("scenario: bad event type '" +
                                        stream.event_type + "'");
        }
        if (stream.rate_per_minute < 0) {
            throw std::invalid_argument("scenario: ratePerMinute must be >= 0");
        }
        if (stream.virtual_users < 1) {
            throw std::invalid_argument("scenario: virtualUsers must be >= 1");
        }
        s.streams.push_back(std::move(stream));
    }
    for (const Json& trigger_json : j.value("triggers", Json::array())) {
        ScenarioTrigger trigger;
        trigger.rule_text = trigger_json.value("rule", "");
        trigger.function_url = trigger_json.value("functionUrl", "");
        trigger.partitions = trigger_json.value("partitions", 1u);
        if (trigger.rule_text.empty()) {
            throw std::invalid_argument("scenario: trigger without rule");
        }
        s.triggers.push_back(std::move(trigger));
    }
    if (j.contains("topology")) {
        s.topology.dispatchers = j["topology"].value("dispatchers", 1);
        s.topology.invokers = j["topology"].value("invokers", 1);
        if (s.topology.dispatchers < 1 || s.topology.invokers < 1) {
            throw std::invalid_argument("scenario: topology counts must be >= 1");
        }
    }
    return s;
}

Json to_json(const Scenario& s) {
    Json streams = Json::array();
    for (const EventStream& stream : s.streams) {
        streams.push_back(Json{{"eventType", stream.event_type},
                               {"ratePerMinute", stream.rate_per_minute},
                               {"payloadBytes", stream.payload_bytes},
                               {"virtualUsers", stream.virtual_users}});
    }
    Json triggers = Json::array();
    for (const ScenarioTrigger& trigger : s.triggers) {
        Json t{{"rule", trigger.rule_text}, {"partitions", trigger.partitions}};
        if (!trigger.function_url.empty()) t["functionUrl"] = trigger.function_url;
        triggers.push_back(std::move(t));
    }
    return Json{{"name", s.name},
                {"eventStreams", std::move(streams)},
                {"durationSeconds", s.duration_seconds},
                {"triggers", std::move(triggers)},
                {"topology", Json{{"dispatchers", s.topology.dispatchers},
                                  {"invokers", s.topology.invokers}}}};
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("scenario: cannot open " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw std::invalid_argument("scenario: invalid JSON in " + path);
    }
    return scenario_from_json(j);
}

std::vector<ScheduledEvent> deterministic_schedule(const Scenario& s) {
    std::vector<ScheduledEvent> schedule;
    const int64_t duration_ms = s.duration_seconds * 1000;
    for (size_t i = 0; i < s.streams.size(); ++i) {
        const double rate = s.streams[i].rate_per_minute;
        if (rate <= 0) continue;
        const double interval_ms = 60000.0 / rate;
        for (uint64_t k = 0;; ++k) {
            const int64_t at =
                static_cast<int64_t>(std::llround((k + 1) * interval_ms));
            if (at > duration_ms) break;
            schedule.push_back(ScheduledEvent{at, i, k});
        }
    }
    std::sort(schedule.begin(), schedule.end(),
              [](const ScheduledEvent& a, const ScheduledEvent& b) {
                  if (a.virtual_ms != b.virtual_ms) {
                      return a.virtual_ms < b.virtual_ms;
                  }
                  if (a.stream_index != b.stream_index) {
                      return a.stream_index < b.stream_index;
                  }
                  return a.k < b.k;
              });
    return schedule;
}

}  // namespace met
