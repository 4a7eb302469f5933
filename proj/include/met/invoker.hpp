// ============================================================================
// met/invoker.hpp — trigger hosting and function invocation tier
// ============================================================================
//
// An invoker owns a set of trigger handlers. Trigger registrations arrive on
// the admin HTTP API; routed events arrive as frames on the event port; when
// a rule is fulfilled the consumed events are POSTed to the trigger's
// function URL by a background worker pool, after the ingest has been acked.
// Delivery is at most once: failures are counted, never retried.
//
// Partitioned triggers: the registering invoker creates its local handler,
// mirrors the registration to the chosen peer replicas (exact trigger id),
// and announces one subscription naming all replica endpoints to every
// dispatcher.
//
// ============================================================================

#ifndef MET_INVOKER_HPP
#define MET_INVOKER_HPP

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "met/framing.hpp"
#include "met/trigger.hpp"
#include "met/wire.hpp"

namespace met {

// Absolute http(s) URL split for client construction.
struct HttpUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // begins with '/', defaults to "/"
};

std::optional<HttpUrl> parse_http_url(std::string_view url);

struct DeliveryStats {
    std::atomic<uint64_t> attempted{0};
    std::atomic<uint64_t> delivered{0};
    std::atomic<uint64_t> failed{0};       // connect errors and non-2xx
    std::atomic<uint64_t> dropped_queue{0};
};

class InvokerService {
  public:
    struct PeerRef {
        std::string admin_url;       // http://host:port
        std::string event_endpoint;  // host:port (frame listener)
    };

    struct Options {
        std::string invoker_id = "inv-0";
        uint16_t admin_port = 0;
        uint16_t event_port = 0;
        std::string advertised_host = "127.0.0.1";
        std::vector<std::string> dispatchers;  // admin base URLs
        std::vector<PeerRef> peers;            // other replicas, not self
        std::string log_path;                  // JSONL; empty disables
        int invoke_workers = 8;
        size_t pending_cap = 100'000;
        size_t high_water_mark = kDefaultHighWaterMark;
        int backpressure_retry_ms = 100;
    };

    explicit InvokerService(Options options);
    ~InvokerService();

    bool start();
    void stop();

    uint16_t admin_port() const noexcept { return admin_port_; }
    uint16_t event_port() const noexcept { return event_port_; }
    std::string event_endpoint() const;

    // Frame handler, public for direct tests: body in, reply body out.
    std::string handle_event_frame(std::string_view body);

    size_t pending_invocations() const;
    const TriggerRegistry& registry() const noexcept { return registry_; }

  private:
    struct Http;
    struct TriggerInfo {
        TriggerRegistration registration;
        bool internal = false;  // created by a registrar
        std::vector<std::string> replica_endpoints;  // registrar only
        std::vector<std::string> replica_admins;     // registrar only
        std::shared_ptr<DeliveryStats> delivery;
    };

    struct PendingInvocation {
        FiringRecord record;
        std::string function_url;
        std::shared_ptr<DeliveryStats> delivery;
    };

    void configure_admin_routes();
    std::pair<int, Json> register_trigger(const TriggerRegistration& reg,
                                          const std::optional<std::string>& id);
    std::pair<int, Json> deregister_trigger(const std::string& trigger_id);
    Json list_triggers();
    void enqueue_invocation(PendingInvocation pending);
    void invocation_worker();
    bool announce_subscription(const std::string& dispatcher,
                               const SubscriptionAnnounce& announce);
    bool retract_subscription(const std::string& dispatcher,
                              const std::string& trigger_id);

    Options options_;
    uint16_t admin_port_ = 0;
    uint16_t event_port_ = 0;

    TriggerRegistry registry_;
    std::mutex reg_mu_;  // serializes registration ops, guards info_
    std::map<std::string, TriggerInfo> info_;

    JsonlWriter log_;
    FrameServer frame_server_;
    std::unique_ptr<Http> http_;
    std::thread admin_thread_;

    mutable std::mutex inv_mu_;
    std::condition_variable inv_cv_;
    std::deque<PendingInvocation> pending_;
    bool draining_ = false;
    std::vector<std::thread> workers_;
    DeliveryStats totals_;
};

}  // namespace met

#endif  // MET_INVOKER_HPP
