#ifndef MET_SINK_HPP
#define MET_SINK_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "met/wire.hpp"

namespace met {

// Mock FaaS function endpoint. Accepts invocation payloads, timestamps each
// on receipt, and logs a latency sample against the fulfilling event's
// creation time. Optional artificial delay and failure rate; failures are
// still logged.
class SinkServer {
  public:
    struct Options {
        uint16_t port = 0;
        std::string log_path;   // JSONL; empty disables
        int delay_ms = 0;       // sleep before responding
        double failure_rate = 0.0;  // probability of responding 500
        uint64_t seed = 17;     // failure sampling
        int http_threads = 32;
    };

    explicit SinkServer(Options options);
    ~SinkServer();

    bool start();
    void stop();
    uint16_t port() const noexcept { return port_; }
    std::string invoke_url() const;

    uint64_t received() const noexcept { return received_.load(); }

  private:
    struct Http;

    Options options_;
    uint16_t port_ = 0;
    std::atomic<uint64_t> received_{0};
    JsonlWriter log_;
    std::unique_ptr<Http> http_;
    std::thread serve_thread_;
};

}  // namespace met

#endif  // MET_SINK_HPP
