#include "met/invoker.hpp"

#include <spdlog/spdlog.h>

#include <map>

#include "httplib.h"
#include "met/clock.hpp"
#include "met/ulid.hpp"

namespace met {

namespace {

InvokerLogLine trigger_line(const std::string& id, const std::string& rule,
                            const std::string& url) {
    InvokerLogLine l;
    l.kind = "trigger";
    l.trigger_id = id;
    l.rule_text = rule;
    l.function_url = url;
    return l;
}

}  // namespace

std::optional<HttpUrl> parse_http_url(std::string_view url) {
    size_t scheme_end;
    if (url.rfind("http://", 0) == 0) {
        scheme_end = 7;
    } else if (url.rfind("https://", 0) == 0) {
        scheme_end = 8;
    } else {
        return std::nullopt;
    }
    const size_t path_start = url.find('/', scheme_end);
    HttpUrl out;
    if (path_start == std::string_view::npos) {
        out.base = std::string(url);
        out.path = "/";
    } else {
        out.base = std::string(url.substr(0, path_start));
        out.path = std::string(url.substr(path_start));
    }
    if (out.base.size() <= scheme_end) return std::nullopt;  // empty host
    return out;
}

struct InvokerService::Http {
    httplib::Server server;
};

InvokerService::InvokerService(Options options)
    : options_(std::move(options)), http_(std::make_unique<Http>()) {
    if (!options_.log_path.empty()) {
        if (!log_.open(options_.log_path)) {
            spdlog::warn("invoker {}: cannot open log {}", options_.invoker_id,
                         options_.log_path);
        }
    }
}

InvokerService::~InvokerService() { stop(); }

std::string InvokerService::event_endpoint() const {
    return options_.advertised_host + ":" + std::to_string(event_port_);
}

// ── Event path ──────────────────────────────────────────────────────────────

std::string InvokerService::handle_event_frame(std::string_view body) {
    auto frame = event_frame_from_json(Json::parse(body, nullptr, false));
    if (!frame) {
        return to_json(FrameReply{FrameStatus::kBadFrame, "", false, 0}).dump();
    }
    FrameReply reply;
    reply.event_id = frame->event.id;

    auto entry = registry_.get(frame->trigger_id);
    if (!entry) {
        reply.status = FrameStatus::kUnknownTrigger;
        return to_json(reply).dump();
    }
    std::optional<Event> event = to_event(frame->event);
    if (!event || !valid_event_type(event->event_type)) {
        reply.status = FrameStatus::kBadFrame;
        return to_json(reply).dump();
    }

    std::optional<PendingInvocation> invocation;
    {
        std::lock_guard<std::mutex> lock(entry->mu);
        if (!entry->alive) {
            reply.status = FrameStatus::kUnknownTrigger;
            return to_json(reply).dump();
        }
        const int64_t created_at = event->created_at_ns;
        const std::string type = event->event_type;
        const std::string event_id = event->id;
        IngestResult result = entry->handler.ingest(std::move(*event));
        switch (result.status) {
            case IngestStatus::kUnknownEventType:
                reply.status = FrameStatus::kUnknownType;
                return to_json(reply).dump();
            case IngestStatus::kBackpressure:
                reply.status = FrameStatus::kBackpressure;
                reply.retry_after_ms = options_.backpressure_retry_ms;
                return to_json(reply).dump();
            case IngestStatus::kOk:
                break;
        }
        if (log_.is_open()) {
            InvokerLogLine l;
            l.kind = "arrival";
            l.trigger_id = frame->trigger_id;
            l.event_id = event_id;
            l.type = type;
            l.created_at_ns = created_at;
            l.arrival_seq = result.arrival_seq;
            log_.write(to_json(l));
        }
        if (result.firing) {
            reply.firing = true;
            if (log_.is_open()) {
                InvokerLogLine l;
                l.kind = "firing";
                l.trigger_id = frame->trigger_id;
                l.case_index = result.firing->case_index;
                l.fulfilling_event_id = result.firing->fulfilling_event_id;
                l.fired_at_ns = result.firing->fired_at_ns;
                for (const auto& [type_name, events] : result.firing->consumed) {
                    auto& ids = l.consumed_ids[type_name];
                    for (const Event& ev : events) ids.push_back(ev.id);
                }
                log_.write(to_json(l));
            }
            invocation = PendingInvocation{std::move(*result.firing),
                                           entry->handler.function_url(),
                                           nullptr};
        }
    }
    if (invocation) {
        // Stats lookup happens outside the handler lock: reg_mu_ is only
        // ever taken before entry->mu, never after.
        {
            std::lock_guard<std::mutex> reg_lock(reg_mu_);
            auto it = info_.find(frame->trigger_id);
            if (it != info_.end()) invocation->delivery = it->second.delivery;
        }
        enqueue_invocation(std::move(*invocation));
    }
    return to_json(reply).dump();
}

void InvokerService::enqueue_invocation(PendingInvocation pending) {
    if (pending.delivery) {
        pending.delivery->attempted.fetch_add(1, std::memory_order_relaxed);
    }
    totals_.attempted.fetch_add(1, std::memory_order_relaxed);
    {
        std::lock_guard<std::mutex> lock(inv_mu_);
        if (pending_.size() >= options_.pending_cap) {
            totals_.dropped_queue.fetch_add(1, std::memory_order_relaxed);
            if (pending.delivery) {
                pending.delivery->dropped_queue.fetch_add(
                    1, std::memory_order_relaxed);
            }
            return;
        }
        pending_.push_back(std::move(pending));
    }
    inv_cv_.notify_one();
}

void InvokerService::invocation_worker() {
    // Keep-alive client per function base URL, per worker.
    std::map<std::string, std::unique_ptr<httplib::Client>> clients;
    for (;;) {
        PendingInvocation pending;
        {
            std::unique_lock<std::mutex> lock(inv_mu_);
            inv_cv_.wait(lock, [this] { return draining_ || !pending_.empty(); });
            if (pending_.empty()) {
                if (draining_) return;
                continue;
            }
            pending = std::move(pending_.front());
            pending_.pop_front();
        }

        auto url = parse_http_url(pending.function_url);
        bool delivered = false;
        int http_status = 0;
        if (url) {
            auto it = clients.find(url->base);
            if (it == clients.end()) {
                auto client = std::make_unique<httplib::Client>(url->base);
                client->set_connection_timeout(2, 0);
                client->set_read_timeout(30, 0);
                client->set_keep_alive(true);
                it = clients.emplace(url->base, std::move(client)).first;
            }
            // firedAt is stamped immediately before transmission.
            pending.record.fired_at_ns = now_wall_ns();
            const std::string body =
                to_json(invocation_payload(pending.record)).dump();
            auto result = it->second->Post(url->path, body, "application/json");
            if (result) {
                http_status = result->status;
                delivered = result->status >= 200 && result->status < 300;
            }
        }
        if (delivered) {
            totals_.delivered.fetch_add(1, std::memory_order_relaxed);
            if (pending.delivery) {
                pending.delivery->delivered.fetch_add(1,
                                                      std::memory_order_relaxed);
            }
        } else {
            totals_.failed.fetch_add(1, std::memory_order_relaxed);
            if (pending.delivery) {
                pending.delivery->failed.fetch_add(1, std::memory_order_relaxed);
            }
        }
        if (log_.is_open()) {
            InvokerLogLine l;
            l.kind = "delivery";
            l.trigger_id = pending.record.trigger_id;
            l.fulfilling_event_id = pending.record.fulfilling_event_id;
            l.status = delivered ? "delivered" : "failed";
            l.http_status = http_status;
            log_.write(to_json(l));
        }
    }
}

// ── Admin API ───────────────────────────────────────────────────────────────

std::pair<int, Json> InvokerService::register_trigger(
    const TriggerRegistration& reg, const std::optional<std::string>& fixed_id) {
    NormalizedRule rule;
    try {
        rule = compile_rule(reg.rule_text);
    } catch (const SyntaxError& e) {
        return {400, Json{{"error", e.what()},
                          {"offset", e.offset()},
                          {"expected", e.expected()}}};
    } catch (const CaseExplosionError& e) {
        return {400, Json{{"error", e.what()}}};
    }
    if (!parse_http_url(reg.function_url)) {
        return {400, Json{{"error", "functionUrl must be an absolute http(s) URL"}}};
    }
    const size_t replicas = 1 + options_.peers.size();
    if (reg.partitions < 1 || reg.partitions > replicas) {
        return {400, Json{{"error", "partitions must be between 1 and " +
                                        std::to_string(replicas)}}};
    }

    std::lock_guard<std::mutex> lock(reg_mu_);
    const std::string trigger_id =
        fixed_id ? *fixed_id : "t-" + new_ulid();

    std::shared_ptr<TriggerRegistry::Entry> entry;
    try {
        entry = registry_.create(trigger_id, rule, reg.function_url,
                                 options_.high_water_mark);
    } catch (const DuplicateTriggerError& e) {
        return {409, Json{{"error", e.what()}}};
    }

    TriggerInfo info;
    info.registration = reg;
    info.internal = fixed_id.has_value();
    info.delivery = std::make_shared<DeliveryStats>();

    if (!fixed_id) {
        // Choose replicas: self first, then peers in configuration order.
        info.replica_endpoints.push_back(event_endpoint());
        for (size_t i = 0; i + 1 < reg.partitions; ++i) {
            info.replica_endpoints.push_back(options_.peers[i].event_endpoint);
            info.replica_admins.push_back(options_.peers[i].admin_url);
        }

        // Mirror the registration onto the peer replicas.
        std::vector<std::string> mirrored;
        for (const std::string& admin : info.replica_admins) {
            httplib::Client client(admin);
            client.set_connection_timeout(2, 0);
            auto result = client.Put("/triggers/" + trigger_id,
                                     to_json(reg).dump(), "application/json");
            if (!result || result->status != 201) {
                for (const std::string& done : mirrored) {
                    httplib::Client(done).Delete("/triggers/" + trigger_id);
                }
                registry_.erase(trigger_id);
                return {502, Json{{"error", "replica registration failed at " +
                                                admin}}};
            }
            mirrored.push_back(admin);
        }

        SubscriptionAnnounce announce{trigger_id, rule.event_types(),
                                      info.replica_endpoints};
        for (const std::string& dispatcher : options_.dispatchers) {
            if (!announce_subscription(dispatcher, announce)) {
                for (const std::string& d : options_.dispatchers) {
                    retract_subscription(d, trigger_id);
                }
                for (const std::string& done : mirrored) {
                    httplib::Client(done).Delete("/triggers/" + trigger_id);
                }
                registry_.erase(trigger_id);
                return {502,
                        Json{{"error", "subscription announce failed at " +
                                           dispatcher}}};
            }
        }
    }

    if (log_.is_open()) {
        log_.write(to_json(
            trigger_line(trigger_id, reg.rule_text, reg.function_url)));
    }
    info_.emplace(trigger_id, std::move(info));
    return {201, Json{{"triggerId", trigger_id},
                      {"eventTypes", rule.event_types()},
                      {"cases", rule.cases.size()},
                      {"replicaEndpoints",
                       info_.at(trigger_id).replica_endpoints}}};
}

std::pair<int, Json> InvokerService::deregister_trigger(
    const std::string& trigger_id) {
    std::lock_guard<std::mutex> lock(reg_mu_);
    auto it = info_.find(trigger_id);
    if (it == info_.end()) {
        return {404, Json{{"error", "unknown trigger: " + trigger_id}}};
    }
    if (!it->second.internal) {
        // Retract routing first so no further events reach the handler, then
        // tear down the peer replicas.
        for (const std::string& dispatcher : options_.dispatchers) {
            retract_subscription(dispatcher, trigger_id);
        }
        for (const std::string& admin : it->second.replica_admins) {
            httplib::Client client(admin);
            client.set_connection_timeout(2, 0);
            client.Delete("/triggers/" + trigger_id);
        }
    }
    const std::optional<size_t> dropped = registry_.erase(trigger_id);
    info_.erase(it);
    return {200, Json{{"triggerId", trigger_id},
                      {"droppedEvents", dropped.value_or(0)}}};
}

Json InvokerService::list_triggers() {
    std::lock_guard<std::mutex> lock(reg_mu_);
    Json out = Json::array();
    for (const auto& [id, info] : info_) {
        auto entry = registry_.get(id);
        if (!entry) continue;
        HandlerSnapshot snap;
        {
            std::lock_guard<std::mutex> entry_lock(entry->mu);
            snap = entry->handler.snapshot();
        }
        Json firings = Json::array();
        for (uint64_t f : snap.stats.firings_by_case) firings.push_back(f);
        out.push_back(Json{
            {"triggerId", id},
            {"rule", info.registration.rule_text},
            {"functionUrl", info.registration.function_url},
            {"partitions", info.registration.partitions},
            {"internal", info.internal},
            {"snapshot",
             Json{{"queueLengths", snap.queue_lengths},
                  {"eventsReceived", snap.stats.events_received},
                  {"firingsByCase", std::move(firings)}}},
            {"invocations",
             Json{{"attempted", info.delivery->attempted.load()},
                  {"delivered", info.delivery->delivered.load()},
                  {"failed", info.delivery->failed.load()},
                  {"droppedQueue", info.delivery->dropped_queue.load()}}}});
    }
    return Json{{"triggers", std::move(out)}};
}

bool InvokerService::announce_subscription(const std::string& dispatcher,
                                           const SubscriptionAnnounce& announce) {
    httplib::Client client(dispatcher);
    client.set_connection_timeout(2, 0);
    auto result =
        client.Post("/subscriptions", to_json(announce).dump(), "application/json");
    return result && result->status == 200;
}

bool InvokerService::retract_subscription(const std::string& dispatcher,
                                          const std::string& trigger_id) {
    httplib::Client client(dispatcher);
    client.set_connection_timeout(2, 0);
    auto result = client.Delete("/subscriptions/" + trigger_id);
    return result && result->status == 200;
}

void InvokerService::configure_admin_routes() {
    auto& server = http_->server;

    server.Post("/triggers", [this](const httplib::Request& req,
                                    httplib::Response& res) {
        auto reg = registration_from_json(Json::parse(req.body, nullptr, false));
        if (!reg) {
            res.status = 400;
            res.set_content(
                Json{{"error", "expected {rule, functionUrl, partitions}"}}.dump(),
                "application/json");
            return;
        }
        auto [status, body] = register_trigger(*reg, std::nullopt);
        res.status = status;
        res.set_content(body.dump(), "application/json");
    });

    server.Put(R"(/triggers/(.+))", [this](const httplib::Request& req,
                                           httplib::Response& res) {
        auto reg = registration_from_json(Json::parse(req.body, nullptr, false));
        if (!reg) {
            res.status = 400;
            res.set_content(
                Json{{"error", "expected {rule, functionUrl, partitions}"}}.dump(),
                "application/json");
            return;
        }
        auto [status, body] = register_trigger(*reg, req.matches[1].str());
        res.status = status;
        res.set_content(body.dump(), "application/json");
    });

    server.Delete(R"(/triggers/(.+))", [this](const httplib::Request& req,
                                              httplib::Response& res) {
        auto [status, body] = deregister_trigger(req.matches[1].str());
        res.status = status;
        res.set_content(body.dump(), "application/json");
    });

    server.Get("/triggers", [this](const httplib::Request&,
                                   httplib::Response& res) {
        res.set_content(list_triggers().dump(), "application/json");
    });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    server.Get("/metrics", [this](const httplib::Request&,
                                  httplib::Response& res) {
        res.set_content(
            Json{{"invokerId", options_.invoker_id},
                 {"triggers", registry_.size()},
                 {"pendingInvocations", pending_invocations()},
                 {"invocations",
                  Json{{"attempted", totals_.attempted.load()},
                       {"delivered", totals_.delivered.load()},
                       {"failed", totals_.failed.load()},
                       {"droppedQueue", totals_.dropped_queue.load()}}}}
                .dump(),
            "application/json");
    });
}

size_t InvokerService::pending_invocations() const {
    std::lock_guard<std::mutex> lock(inv_mu_);
    return pending_.size();
}

bool InvokerService::start() {
    if (!frame_server_.start(options_.event_port,
                             [this](std::string_view body) {
                                 return handle_event_frame(body);
                             })) {
        spdlog::error("invoker {}: cannot bind event port {}",
                      options_.invoker_id, options_.event_port);
        return false;
    }
    event_port_ = frame_server_.port();

    draining_ = false;
    workers_.reserve(options_.invoke_workers);
    for (int i = 0; i < options_.invoke_workers; ++i) {
        workers_.emplace_back([this] { invocation_worker(); });
    }

    auto& server = http_->server;
    server.new_task_queue = [] { return new httplib::ThreadPool(8); };
    configure_admin_routes();
    if (options_.admin_port == 0) {
        const int bound = server.bind_to_any_port("0.0.0.0");
        if (bound <= 0) return false;
        admin_port_ = static_cast<uint16_t>(bound);
    } else {
        if (!server.bind_to_port("0.0.0.0", options_.admin_port)) {
            spdlog::error("invoker {}: cannot bind admin port {}",
                          options_.invoker_id, options_.admin_port);
            frame_server_.stop();
            return false;
        }
        admin_port_ = options_.admin_port;
    }
    admin_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    spdlog::info("invoker {}: admin :{} events :{}", options_.invoker_id,
                 admin_port_, event_port_);
    return true;
}

void InvokerService::stop() {
    if (admin_thread_.joinable()) {
        http_->server.stop();
        admin_thread_.join();
    }
    frame_server_.stop();
    {
        std::lock_guard<std::mutex> lock(inv_mu_);
        draining_ = true;
        pending_.clear();  // at-most-once permits dropping on shutdown
    }
    inv_cv_.notify_all();
    for (std::thread& w : workers_) {
        if (w.joinable()) w.join();
    }
    workers_.clear();
}

}  // namespace met
