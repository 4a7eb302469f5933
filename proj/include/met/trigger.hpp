// ============================================================================
// met/trigger.hpp — per-trigger state and fulfillment
// ============================================================================
//
// A TriggerHandler keeps one FIFO trigger set per event type named by its
// rule. Each ingest appends the event, checks the rule's cases in ascending
// index order, and on the first satisfied case pulls exactly the required
// events (oldest first) out of the involved queues and returns them as a
// FiringRecord.
//
// Invariant (quiescence): after every completed ingest no case is satisfied.
// Since one arrival raises exactly one type's count by one, at most one case
// can newly become satisfied per arrival, so a single consume restores the
// invariant; this is asserted, not looped.
//
// Handlers are not internally synchronized. All ingests for one handler must
// be serialized by the caller (TriggerRegistry::Entry carries the mutex);
// distinct handlers are safe to drive in parallel.
//
// ============================================================================

#ifndef MET_TRIGGER_HPP
#define MET_TRIGGER_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "met/event.hpp"
#include "met/rule.hpp"

namespace met {

inline constexpr size_t kDefaultHighWaterMark = 1'000'000;

struct FiringRecord {
    std::string trigger_id;
    size_t case_index = 0;
    // event type -> consumed events, oldest first; only the satisfied case's
    // types appear, each with exactly its required count.
    std::map<std::string, std::vector<Event>> consumed;
    int64_t fired_at_ns = 0;
    std::string fulfilling_event_id;
};

enum class IngestStatus : uint8_t {
    kOk,
    kUnknownEventType,  // no queue for the type: a routing bug upstream
    kBackpressure,      // the type's queue is at its high-water mark
};

struct IngestResult {
    IngestStatus status = IngestStatus::kOk;
    uint64_t arrival_seq = 0;  // assigned to the event; 0 when rejected
    std::optional<FiringRecord> firing;

    bool ok() const noexcept { return status == IngestStatus::kOk; }
};

struct HandlerStats {
    uint64_t events_received = 0;
    std::vector<uint64_t> firings_by_case;

    uint64_t total_firings() const {
        uint64_t n = 0;
        for (uint64_t f : firings_by_case) n += f;
        return n;
    }
};

struct HandlerSnapshot {
    std::map<std::string, size_t> queue_lengths;
    HandlerStats stats;
};

class TriggerHandler {
  public:
    TriggerHandler(std::string trigger_id, NormalizedRule rule,
                   std::string function_url,
                   size_t high_water_mark = kDefaultHighWaterMark);

    IngestResult ingest(Event event);

    HandlerSnapshot snapshot() const;

    // True when some case is satisfied by the current queue lengths. Always
    // false between ingests (quiescence).
    bool any_case_satisfied() const;

    // Drops all queued events; returns how many were dropped.
    size_t clear();

    const std::string& trigger_id() const noexcept { return trigger_id_; }
    const NormalizedRule& rule() const noexcept { return rule_; }
    const std::string& function_url() const noexcept { return function_url_; }
    size_t high_water_mark() const noexcept { return high_water_mark_; }

  private:
    bool case_satisfied(const CaseRequirement& c) const;
    FiringRecord consume(const CaseRequirement& c, const std::string& cause_id);

    std::string trigger_id_;
    NormalizedRule rule_;
    std::string function_url_;
    size_t high_water_mark_;

    std::map<std::string, std::deque<Event>> trigger_sets_;
    // Cases that mention a type, ascending; only these can newly become
    // satisfied when that type arrives.
    std::map<std::string, std::vector<size_t>> cases_by_type_;
    uint64_t next_seq_ = 0;
    HandlerStats stats_;
};

// ── Registry ────────────────────────────────────────────────────────────────

class DuplicateTriggerError : public std::runtime_error {
  public:
    explicit DuplicateTriggerError(const std::string& trigger_id);
};

// Owns handlers by trigger id. Entries are shared so an ingest can keep one
// alive across a concurrent deregistration; `alive` flips under `mu`.
class TriggerRegistry {
  public:
    struct Entry {
        explicit Entry(TriggerHandler h) : handler(std::move(h)) {}
        std::mutex mu;
        TriggerHandler handler;  // guarded by mu
        bool alive = true;       // guarded by mu
    };

    std::shared_ptr<Entry> create(std::string trigger_id, NormalizedRule rule,
                                  std::string function_url,
                                  size_t high_water_mark = kDefaultHighWaterMark);

    std::shared_ptr<Entry> get(const std::string& trigger_id) const;

    // Removes the handler and drops its queued events; nullopt if unknown.
    std::optional<size_t> erase(const std::string& trigger_id);

    std::vector<std::string> ids() const;
    size_t size() const;

  private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

}  // namespace met

#endif  // MET_TRIGGER_HPP
