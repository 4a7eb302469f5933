#include "met/sink.hpp"

#include <spdlog/spdlog.h>

#include <mutex>
#include <random>

#include "httplib.h"
#include "met/clock.hpp"

namespace met {

struct SinkServer::Http {
    httplib::Server server;
    std::mutex rng_mu;
    std::mt19937_64 rng;
};

SinkServer::SinkServer(Options options)
    : options_(std::move(options)), http_(std::make_unique<Http>()) {
    http_->rng.seed(options_.seed);
    if (!options_.log_path.empty()) {
        if (!log_.open(options_.log_path)) {
            spdlog::warn("sink: cannot open log {}", options_.log_path);
        }
    }
}

SinkServer::~SinkServer() { stop(); }

std::string SinkServer::invoke_url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/invoke";
}

bool SinkServer::start() {
    auto& server = http_->server;
    const int threads = options_.http_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

    auto handle = [this](const httplib::Request& req, httplib::Response& res) {
        // Application logic would start here; this is the timestamp the
        // latency sample is taken against.
        const int64_t received_at = now_wall_ns();
        received_.fetch_add(1, std::memory_order_relaxed);

        auto payload =
            invocation_payload_from_json(Json::parse(req.body, nullptr, false));
        if (!payload) {
            res.status = 400;
            res.set_content(Json{{"error", "bad invocation payload"}}.dump(),
                            "application/json");
            return;
        }

        bool fail = false;
        if (options_.failure_rate > 0.0) {
            std::lock_guard<std::mutex> lock(http_->rng_mu);
            std::uniform_real_distribution<double> dist(0.0, 1.0);
            fail = dist(http_->rng) < options_.failure_rate;
        }

        SinkLogLine line;
        line.received_at_ns = received_at;
        line.trigger_id = payload->trigger_id;
        line.case_index = payload->case_index;
        line.fulfilling_event_id = payload->fulfilling_event_id;
        for (const auto& [type, events] : payload->events) {
            auto& ids = line.event_ids[type];
            for (const WireEvent& ev : events) {
                ids.push_back(ev.id);
                if (ev.id == payload->fulfilling_event_id) {
                    line.fulfilling_created_at_ns = ev.created_at_ns;
                }
            }
        }
        if (line.fulfilling_created_at_ns != 0) {
            line.latency_ns = received_at - line.fulfilling_created_at_ns;
        }
        line.responded_status = fail ? 500 : 200;
        if (log_.is_open()) log_.write(to_json(line));

        if (options_.delay_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options_.delay_ms));
        }
        res.status = line.responded_status;
        res.set_content(Json{{"ok", !fail}}.dump(), "application/json");
    };

    server.Post("/invoke", handle);
    server.Post("/", handle);
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
    server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(Json{{"received", received_.load()}}.dump(),
                        "application/json");
    });

    if (options_.port == 0) {
        const int bound = server.bind_to_any_port("0.0.0.0");
        if (bound <= 0) return false;
        port_ = static_cast<uint16_t>(bound);
    } else {
        if (!server.bind_to_port("0.0.0.0", options_.port)) return false;
        port_ = options_.port;
    }
    serve_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    spdlog::info("sink: listening on :{}", port_);
    return true;
}

void SinkServer::stop() {
    if (serve_thread_.joinable()) {
        http_->server.stop();
        serve_thread_.join();
    }
}

}  // namespace met
