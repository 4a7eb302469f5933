// ============================================================================
// met/dispatcher.hpp — stateless event-ingestion tier
// ============================================================================
//
// Accepts producer events over HTTP, assigns each a sortable unique id,
// looks up subscribed triggers by event type, and forwards the event to
// exactly one replica per subscribed trigger over persistent frame
// connections. Holds no event-derived state beyond round-robin cursors;
// a restarted dispatcher behaves identically once re-announced to.
//
// ============================================================================

#ifndef MET_DISPATCHER_HPP
#define MET_DISPATCHER_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "met/framing.hpp"
#include "met/subscription.hpp"
#include "met/wire.hpp"

namespace met {

// Shared cache of persistent frame connections, one per downstream endpoint.
class FrameConnectionPool {
  public:
    std::shared_ptr<FrameClient> get(const std::string& endpoint);

  private:
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<FrameClient>> clients_;
};

class DispatcherService {
  public:
    struct Options {
        uint16_t port = 0;             // 0 picks an ephemeral port
        std::string delivery_log;      // JSONL path; empty disables
        int http_threads = 16;
        int backpressure_retry_ms = 100;
    };

    struct Metrics {
        std::atomic<uint64_t> events_received{0};
        std::atomic<uint64_t> frames_ok{0};
        std::atomic<uint64_t> frames_backpressure{0};
        std::atomic<uint64_t> frames_rejected{0};  // unknown trigger/type
        std::atomic<uint64_t> frames_failed{0};    // connection failures
    };

    struct IngestOutcome {
        std::string event_id;
        int matched = 0;
        int delivered = 0;
        int backpressured = 0;
        int failed = 0;
    };

    explicit DispatcherService(Options options);
    ~DispatcherService();

    bool start();
    void stop();
    uint16_t port() const noexcept { return port_; }

    // Core routing step, also driven directly by unit tests.
    IngestOutcome ingest_event(const std::string& type,
                               const std::string& payload_b64,
                               int64_t created_at_ns);

    SubscriptionTable& table() noexcept { return table_; }
    const Metrics& metrics() const noexcept { return metrics_; }

  private:
    struct Http;  // hides httplib from this header
    void configure_routes();

    Options options_;
    uint16_t port_ = 0;
    SubscriptionTable table_;
    FrameConnectionPool pool_;
    Metrics metrics_;
    JsonlWriter delivery_log_;
    std::unique_ptr<Http> http_;
    std::thread serve_thread_;
};

}  // namespace met

#endif  // MET_DISPATCHER_HPP
