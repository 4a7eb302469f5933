#include "met/trigger.hpp"

#include <cassert>

#include "met/clock.hpp"

namespace met {

bool valid_event_type(std::string_view type) {
    if (type.empty()) return false;
    for (char c : type) {
        if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) return false;
    }
    return true;
}

TriggerHandler::TriggerHandler(std::string trigger_id, NormalizedRule rule,
                               std::string function_url,
                               size_t high_water_mark)
    : trigger_id_(std::move(trigger_id)),
      rule_(std::move(rule)),
      function_url_(std::move(function_url)),
      high_water_mark_(high_water_mark) {
    stats_.firings_by_case.assign(rule_.cases.size(), 0);
    for (const CaseRequirement& c : rule_.cases) {
        for (const auto& [type, count] : c.requirements) {
            trigger_sets_[type];  // one queue per distinct type in the rule
            cases_by_type_[type].push_back(c.case_index);
        }
    }
}

bool TriggerHandler::case_satisfied(const CaseRequirement& c) const {
    for (const auto& [type, count] : c.requirements) {
        auto it = trigger_sets_.find(type);
        if (it == trigger_sets_.end() || it->second.size() < count) return false;
    }
    return true;
}

FiringRecord TriggerHandler::consume(const CaseRequirement& c,
                                     const std::string& cause_id) {
    FiringRecord record;
    record.trigger_id = trigger_id_;
    record.case_index = c.case_index;
    record.fired_at_ns = now_wall_ns();
    record.fulfilling_event_id = cause_id;
    for (const auto& [type, count] : c.requirements) {
        std::deque<Event>& queue = trigger_sets_[type];
        std::vector<Event>& taken = record.consumed[type];
        taken.reserve(count);
        for (uint64_t i = 0; i < count; ++i) {
            taken.push_back(std::move(queue.front()));
            queue.pop_front();
        }
    }
    return record;
}

IngestResult TriggerHandler::ingest(Event event) {
    auto it = trigger_sets_.find(event.event_type);
    if (it == trigger_sets_.end()) {
        return {IngestStatus::kUnknownEventType, 0, std::nullopt};
    }
    if (it->second.size() >= high_water_mark_) {
        return {IngestStatus::kBackpressure, 0, std::nullopt};
    }
    const uint64_t seq = ++next_seq_;
    event.arrival_seq = seq;
    const std::string cause_id = event.id;
    const std::string type = event.event_type;
    it->second.push_back(std::move(event));
    ++stats_.events_received;

    // Only cases naming the arrived type can have become satisfied; take the
    // lowest index among them.
    for (size_t case_index : cases_by_type_[type]) {
        const CaseRequirement& c = rule_.cases[case_index];
        if (!case_satisfied(c)) continue;
        FiringRecord record = consume(c, cause_id);
        ++stats_.firings_by_case[case_index];
        assert(!any_case_satisfied());  // quiescence restored by one consume
        return {IngestStatus::kOk, seq, std::move(record)};
    }
    return {IngestStatus::kOk, seq, std::nullopt};
}

HandlerSnapshot TriggerHandler::snapshot() const {
    HandlerSnapshot snap;
    for (const auto& [type, queue] : trigger_sets_) {
        snap.queue_lengths[type] = queue.size();
    }
    snap.stats = stats_;
    return snap;
}

bool TriggerHandler::any_case_satisfied() const {
    for (const CaseRequirement& c : rule_.cases) {
        if (case_satisfied(c)) return true;
    }
    return false;
}

size_t TriggerHandler::clear() {
    size_t dropped = 0;
    for (auto& [type, queue] : trigger_sets_) {
        dropped += queue.size();
        queue.clear();
    }
    return dropped;
}

DuplicateTriggerError::DuplicateTriggerError(const std::string& trigger_id)
    : std::runtime_error("trigger id already registered: " + trigger_id) {}

std::shared_ptr<TriggerRegistry::Entry> TriggerRegistry::create(
    std::string trigger_id, NormalizedRule rule, std::string function_url,
    size_t high_water_mark) {
    std::unique_lock lock(mu_);
    if (entries_.count(trigger_id) != 0) {
        throw DuplicateTriggerError(trigger_id);
    }
    auto entry = std::make_shared<Entry>(
        TriggerHandler(trigger_id, std::move(rule), std::move(function_url),
                       high_water_mark));
    entries_.emplace(std::move(trigger_id), entry);
    return entry;
}

std::shared_ptr<TriggerRegistry::Entry> TriggerRegistry::get(
    const std::string& trigger_id) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(trigger_id);
    return it == entries_.end() ? nullptr : it->second;
}

std::optional<size_t> TriggerRegistry::erase(const std::string& trigger_id) {
    std::shared_ptr<Entry> entry;
    {
        std::unique_lock lock(mu_);
        auto it = entries_.find(trigger_id);
        if (it == entries_.end()) return std::nullopt;
        entry = it->second;
        entries_.erase(it);
    }
    std::lock_guard<std::mutex> lock(entry->mu);
    entry->alive = false;
    return entry->handler.clear();
}

std::vector<std::string> TriggerRegistry::ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [id, entry] : entries_) out.push_back(id);
    return out;
}

size_t TriggerRegistry::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

}  // namespace met
