#ifndef MET_SUBSCRIPTION_HPP
#define MET_SUBSCRIPTION_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "met/wire.hpp"

namespace met {

// Event-type -> subscribed triggers, each with its replica endpoints and a
// round-robin cursor. Updates replace a trigger's entries atomically; reads
// take snapshots, so ingest never observes a half-applied announcement.
class SubscriptionTable {
  public:
    struct Entry {
        std::string trigger_id;
        std::vector<std::string> endpoints;
        std::atomic<uint64_t> cursor{0};

        // Per-dispatcher round-robin; no cross-dispatcher coordination.
        const std::string& next_endpoint() {
            return endpoints[cursor.fetch_add(1) % endpoints.size()];
        }
    };

    // Registers (or replaces) the trigger's entry under every event type.
    void subscribe(const SubscriptionAnnounce& announce);

    // Removes the trigger from every type; false if it was not subscribed.
    bool unsubscribe(const std::string& trigger_id);

    // Snapshot of the entries subscribed to `type` (possibly empty).
    std::vector<std::shared_ptr<Entry>> lookup(const std::string& type) const;

    size_t trigger_count() const;
    Json dump() const;

  private:
    void remove_locked(const std::string& trigger_id);

    mutable std::shared_mutex mu_;
    std::map<std::string, std::vector<std::shared_ptr<Entry>>> by_type_;
    std::map<std::string, std::vector<std::string>> types_by_trigger_;
};

}  // namespace met

#endif  // MET_SUBSCRIPTION_HPP
