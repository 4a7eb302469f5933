#include "met/replay.hpp"

#include <deque>
#include <map>

namespace met {

std::vector<FiringRecord> replay(const NormalizedRule& rule,
                                 const std::vector<Event>& events,
                                 std::string_view trigger_id) {
    std::map<std::string, std::deque<Event>> pending;
    for (const std::string& type : rule.event_types()) pending[type];

    std::vector<FiringRecord> firings;
    uint64_t seq = 0;
    for (const Event& incoming : events) {
        auto queue_it = pending.find(incoming.event_type);
        if (queue_it == pending.end()) continue;  // not routed to this rule
        Event stored = incoming;
        stored.arrival_seq = ++seq;
        queue_it->second.push_back(std::move(stored));

        for (const CaseRequirement& c : rule.cases) {
            bool satisfied = true;
            for (const auto& [type, count] : c.requirements) {
                if (pending[type].size() < count) {
                    satisfied = false;
                    break;
                }
            }
            if (!satisfied) continue;

            FiringRecord record;
            record.trigger_id = std::string(trigger_id);
            record.case_index = c.case_index;
            record.fulfilling_event_id = incoming.id;
            record.fired_at_ns = 0;  // replay output is time-free
            for (const auto& [type, count] : c.requirements) {
                std::deque<Event>& queue = pending[type];
                std::vector<Event>& taken = record.consumed[type];
                for (uint64_t i = 0; i < count; ++i) {
                    taken.push_back(std::move(queue.front()));
                    queue.pop_front();
                }
            }
            firings.push_back(std::move(record));
            break;  // one arrival raises one count: at most one case fires
        }
    }
    return firings;
}

std::vector<FiringRecord> replay(std::string_view rule_text,
                                 const std::vector<Event>& events) {
    return replay(compile_rule(rule_text), events);
}

InvocationRatio invocation_ratio(std::string_view rule_text,
                                 const std::vector<Event>& events) {
    const NormalizedRule rule = compile_rule(rule_text);
    InvocationRatio ratio;
    ratio.events = events.size();
    ratio.firings = replay(rule, events).size();
    return ratio;
}

}  // namespace met
