#include "met/subscription.hpp"

#include <algorithm>

namespace met {

void SubscriptionTable::subscribe(const SubscriptionAnnounce& announce) {
    std::unique_lock lock(mu_);
    remove_locked(announce.trigger_id);
    for (const std::string& type : announce.event_types) {
        auto entry = std::make_shared<Entry>();
        entry->trigger_id = announce.trigger_id;
        entry->endpoints = announce.replica_endpoints;
        by_type_[type].push_back(std::move(entry));
    }
    types_by_trigger_[announce.trigger_id] = announce.event_types;
}

bool SubscriptionTable::unsubscribe(const std::string& trigger_id) {
    std::unique_lock lock(mu_);
    if (types_by_trigger_.count(trigger_id) == 0) return false;
    remove_locked(trigger_id);
    return true;
}

void SubscriptionTable::remove_locked(const std::string& trigger_id) {
    auto it = types_by_trigger_.find(trigger_id);
    if (it == types_by_trigger_.end()) return;
    for (const std::string& type : it->second) {
        auto list_it = by_type_.find(type);
        if (list_it == by_type_.end()) continue;
        auto& entries = list_it->second;
        entries.erase(std::remove_if(entries.begin(), entries.end(),
                                     [&](const std::shared_ptr<Entry>& e) {
                                         return e->trigger_id == trigger_id;
                                     }),
                      entries.end());
        if (entries.empty()) by_type_.erase(list_it);
    }
    types_by_trigger_.erase(it);
}

std::vector<std::shared_ptr<SubscriptionTable::Entry>> SubscriptionTable::lookup(
    const std::string& type) const {
    std::shared_lock lock(mu_);
    auto it = by_type_.find(type);
    if (it == by_type_.end()) return {};
    return it->second;
}

size_t SubscriptionTable::trigger_count() const {
    std::shared_lock lock(mu_);
    return types_by_trigger_.size();
}

Json SubscriptionTable::dump() const {
    std::shared_lock lock(mu_);
    Json by_type = Json::object();
    for (const auto& [type, entries] : by_type_) {
        Json arr = Json::array();
        for (const auto& entry : entries) {
            arr.push_back(Json{{"triggerId", entry->trigger_id},
                               {"replicaEndpoints", entry->endpoints}});
        }
        by_type[type] = std::move(arr);
    }
    return by_type;
}

}  // namespace met
