#include "met/dispatcher.hpp"

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "met/clock.hpp"
#include "met/ulid.hpp"

namespace met {

std::shared_ptr<FrameClient> FrameConnectionPool::get(
    const std::string& endpoint) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = clients_.find(endpoint);
    if (it != clients_.end()) return it->second;
    auto client = std::make_shared<FrameClient>(endpoint);
    clients_.emplace(endpoint, client);
    return client;
}

struct DispatcherService::Http {
    httplib::Server server;
};

DispatcherService::DispatcherService(Options options)
    : options_(std::move(options)), http_(std::make_unique<Http>()) {
    if (!options_.delivery_log.empty()) {
        if (!delivery_log_.open(options_.delivery_log)) {
            spdlog::warn("dispatcher: cannot open delivery log {}",
                         options_.delivery_log);
        }
    }
}

DispatcherService::~DispatcherService() { stop(); }

DispatcherService::IngestOutcome DispatcherService::ingest_event(
    const std::string& type, const std::string& payload_b64,
    int64_t created_at_ns) {
    IngestOutcome outcome;
    outcome.event_id = new_ulid();
    metrics_.events_received.fetch_add(1, std::memory_order_relaxed);

    const auto entries = table_.lookup(type);
    outcome.matched = static_cast<int>(entries.size());
    if (entries.empty()) return outcome;

    WireEvent event;
    event.id = outcome.event_id;
    event.type = type;
    event.payload_b64 = payload_b64;
    event.created_at_ns = created_at_ns;

    for (const auto& entry : entries) {
        const std::string& endpoint = entry->next_endpoint();
        const std::string body =
            to_json(EventFrame{entry->trigger_id, event}).dump();
        std::string reply_body;
        std::string status;
        if (!pool_.get(endpoint)->call(body, reply_body)) {
            status = "connect_error";
            ++outcome.failed;
            metrics_.frames_failed.fetch_add(1, std::memory_order_relaxed);
        } else {
            auto reply = frame_reply_from_json(
                Json::parse(reply_body, nullptr, false));
            const FrameStatus fs =
                reply ? reply->status : FrameStatus::kBadFrame;
            status = frame_status_name(fs);
            switch (fs) {
                case FrameStatus::kOk:
                    ++outcome.delivered;
                    metrics_.frames_ok.fetch_add(1, std::memory_order_relaxed);
                    break;
                case FrameStatus::kBackpressure:
                    ++outcome.backpressured;
                    metrics_.frames_backpressure.fetch_add(
                        1, std::memory_order_relaxed);
                    break;
                default:
                    ++outcome.failed;
                    metrics_.frames_rejected.fetch_add(
                        1, std::memory_order_relaxed);
                    break;
            }
        }
        if (delivery_log_.is_open()) {
            delivery_log_.write(to_json(DeliveryLogLine{
                outcome.event_id, entry->trigger_id, endpoint, status}));
        }
    }
    return outcome;
}

void DispatcherService::configure_routes() {
    auto& server = http_->server;

    server.Post("/events", [this](const httplib::Request& req,
                                  httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() ||
            !body.contains("type") || !body["type"].is_string()) {
            res.status = 400;
            res.set_content(Json{{"error", "expected {type, payload, createdAt}"}}.dump(),
                            "application/json");
            return;
        }
        const std::string type = body["type"].get<std::string>();
        if (!valid_event_type(type)) {
            res.status = 400;
            res.set_content(Json{{"error", "event type must match [a-zA-Z]+"}}.dump(),
                            "application/json");
            return;
        }
        std::string payload;
        if (body.contains("payload") && body["payload"].is_string()) {
            payload = body["payload"].get<std::string>();
        }
        int64_t created_at = now_wall_ns();
        if (body.contains("createdAt") && body["createdAt"].is_number()) {
            created_at = body["createdAt"].get<int64_t>();
        }

        const IngestOutcome outcome = ingest_event(type, payload, created_at);
        Json reply{{"eventId", outcome.event_id},
                   {"deliveredTo", outcome.matched}};
        if (outcome.backpressured > 0) reply["backpressured"] = outcome.backpressured;
        if (outcome.failed > 0) reply["failed"] = outcome.failed;
        if (outcome.matched > 0 && outcome.backpressured == outcome.matched) {
            reply["retryAfterMs"] = options_.backpressure_retry_ms;
            res.status = 503;
        }
        res.set_content(reply.dump(), "application/json");
    });

    server.Post("/subscriptions", [this](const httplib::Request& req,
                                         httplib::Response& res) {
        auto announce =
            subscription_from_json(Json::parse(req.body, nullptr, false));
        if (!announce) {
            res.status = 400;
            res.set_content(
                Json{{"error",
                      "expected {triggerId, eventTypes, replicaEndpoints}"}}
                    .dump(),
                "application/json");
            return;
        }
        for (const std::string& type : announce->event_types) {
            if (!valid_event_type(type)) {
                res.status = 400;
                res.set_content(Json{{"error", "bad event type: " + type}}.dump(),
                                "application/json");
                return;
            }
        }
        for (const std::string& endpoint : announce->replica_endpoints) {
            if (!parse_endpoint(endpoint)) {
                res.status = 400;
                res.set_content(
                    Json{{"error", "bad endpoint: " + endpoint}}.dump(),
                    "application/json");
                return;
            }
            if (!pool_.get(endpoint)->ensure_connected()) {
                res.status = 400;
                res.set_content(
                    Json{{"error", "endpoint unreachable: " + endpoint}}.dump(),
                    "application/json");
                return;
            }
        }
        table_.subscribe(*announce);
        res.set_content(to_json(*announce).dump(), "application/json");
    });

    server.Delete(R"(/subscriptions/(.+))", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
        const bool removed = table_.unsubscribe(req.matches[1]);
        res.set_content(Json{{"removed", removed}}.dump(), "application/json");
    });

    server.Get("/subscriptions", [this](const httplib::Request&,
                                        httplib::Response& res) {
        res.set_content(table_.dump().dump(), "application/json");
    });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    server.Get("/metrics", [this](const httplib::Request&,
                                  httplib::Response& res) {
        res.set_content(
            Json{{"eventsReceived", metrics_.events_received.load()},
                 {"framesOk", metrics_.frames_ok.load()},
                 {"framesBackpressure", metrics_.frames_backpressure.load()},
                 {"framesRejected", metrics_.frames_rejected.load()},
                 {"framesFailed", metrics_.frames_failed.load()},
                 {"triggers", table_.trigger_count()}}
                .dump(),
            "application/json");
    });
}

bool DispatcherService::start() {
    auto& server = http_->server;
    const int threads = options_.http_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    configure_routes();

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
    spdlog::info("dispatcher: listening on :{}", port_);
    return true;
}

void DispatcherService::stop() {
    if (serve_thread_.joinable()) {
        http_->server.stop();
        serve_thread_.join();
    }
}

}  // namespace met
