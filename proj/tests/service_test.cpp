#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "met/base64.hpp"
#include "met/clock.hpp"
#include "met/dispatcher.hpp"
#include "met/invoker.hpp"
#include "met/replay.hpp"
#include "met/sink.hpp"

namespace met {
namespace {

namespace fs = std::filesystem;

std::string temp_dir() {
    std::string templ = (fs::temp_directory_path() / "met-test-XXXXXX").string();
    char* made = ::mkdtemp(templ.data());
    return made ? std::string(made) : std::string("/tmp");
}

struct PostResult {
    int status = 0;
    Json body;
};

PostResult post_event(httplib::Client& client, const std::string& type,
                      const std::string& payload = "") {
    PostResult out;
    auto res = client.Post("/events",
                           Json{{"type", type},
                                {"payload", base64_encode(payload)},
                                {"createdAt", now_wall_ns()}}
                               .dump(),
                           "application/json");
    if (!res) return out;
    out.status = res->status;
    out.body = Json::parse(res->body, nullptr, false);
    return out;
}

// Waits until `predicate` holds or the timeout passes.
bool eventually(const std::function<bool()>& predicate, int timeout_ms = 5000) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (predicate()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return predicate();
}

struct Stack {
    struct Config {
        int sink_delay_ms = 0;
        double sink_failure_rate = 0.0;
        size_t high_water = kDefaultHighWaterMark;
        bool delivery_log = false;
        bool invoker_log = true;
        int invoke_workers = 4;
    };

    static SinkServer::Options sink_options(const Config& config,
                                            const std::string& dir) {
        SinkServer::Options o;
        o.log_path = dir + "/sink.jsonl";
        o.delay_ms = config.sink_delay_ms;
        o.failure_rate = config.sink_failure_rate;
        return o;
    }
    static DispatcherService::Options dispatcher_options(
        const Config& config, const std::string& dir) {
        DispatcherService::Options o;
        if (config.delivery_log) o.delivery_log = dir + "/delivery.jsonl";
        return o;
    }
    static InvokerService::Options invoker_options(const Config& config,
                                                   const std::string& dir) {
        InvokerService::Options o;
        if (config.invoker_log) o.log_path = dir + "/invoker.jsonl";
        o.high_water_mark = config.high_water;
        o.invoke_workers = config.invoke_workers;
        return o;
    }
};

// One sink + one dispatcher + N invokers, all in-process.
struct Services {
    std::string dir = temp_dir();
    std::unique_ptr<SinkServer> sink;
    std::unique_ptr<DispatcherService> dispatcher;
    std::vector<std::unique_ptr<InvokerService>> invokers;
    std::unique_ptr<httplib::Client> events;
    std::unique_ptr<httplib::Client> admin;

    ~Services() {
        for (auto& inv : invokers) inv->stop();
        if (dispatcher) dispatcher->stop();
        if (sink) sink->stop();
    }

    void start(const Stack::Config& config = {}, int invoker_count = 1) {
        sink = std::make_unique<SinkServer>(Stack::sink_options(config, dir));
        ASSERT_TRUE(sink->start());
        dispatcher = std::make_unique<DispatcherService>(
            Stack::dispatcher_options(config, dir));
        ASSERT_TRUE(dispatcher->start());

        // Event and admin ports are fixed up front so peers can be named.
        std::vector<uint16_t> admin_ports, event_ports;
        for (int i = 0; i < invoker_count; ++i) {
            admin_ports.push_back(0);
            event_ports.push_back(0);
        }
        for (int i = 0; i < invoker_count; ++i) {
            InvokerService::Options o = Stack::invoker_options(config, dir);
            o.invoker_id = "inv-" + std::to_string(i);
            if (config.invoker_log) {
                o.log_path = dir + "/invoker-" + std::to_string(i) + ".jsonl";
            }
            o.dispatchers = {dispatcher_url()};
            invokers.push_back(std::make_unique<InvokerService>(o));
        }
        // Start all, then patch peers via a second pass is impossible with
        // ephemeral ports; instead start sequentially and give later
        // invokers the earlier ones as peers, and earlier ones get peers
        // only when started with fixed ports. For these tests the registrar
        // is always invoker 0, so only its peer list matters.
        for (int i = invoker_count - 1; i >= 0; --i) {
            if (i == 0) {
                InvokerService::Options o = Stack::invoker_options(config, dir);
                o.invoker_id = "inv-0";
                if (config.invoker_log) o.log_path = dir + "/invoker-0.jsonl";
                o.dispatchers = {dispatcher_url()};
                for (int p = 1; p < invoker_count; ++p) {
                    o.peers.push_back(
                        {"http://127.0.0.1:" +
                             std::to_string(invokers[p]->admin_port()),
                         invokers[p]->event_endpoint()});
                }
                invokers[0] = std::make_unique<InvokerService>(o);
            }
            ASSERT_TRUE(invokers[i]->start());
        }
        events = std::make_unique<httplib::Client>(dispatcher_url());
        events->set_keep_alive(true);
        admin = std::make_unique<httplib::Client>(admin_url(0));
    }

    std::string dispatcher_url() const {
        return "http://127.0.0.1:" + std::to_string(dispatcher->port());
    }
    std::string admin_url(size_t i) const {
        return "http://127.0.0.1:" + std::to_string(invokers[i]->admin_port());
    }

    std::string register_trigger(const std::string& rule, uint32_t partitions = 1) {
        auto res = admin->Post("/triggers",
                               Json{{"rule", rule},
                                    {"functionUrl", sink->invoke_url()},
                                    {"partitions", partitions}}
                                   .dump(),
                               "application/json");
        if (!res || res->status != 201) return "";
        return Json::parse(res->body).value("triggerId", "");
    }
};

TEST(Services, RegisterRouteFireInvoke) {
    Services services;
    services.start();
    const std::string trigger_id = services.register_trigger("3:a");
    ASSERT_FALSE(trigger_id.empty());

    for (int i = 0; i < 2; ++i) {
        const PostResult ack = post_event(*services.events, "a", "x");
        EXPECT_EQ(ack.status, 200);
        EXPECT_EQ(ack.body.value("deliveredTo", -1), 1);
    }
    EXPECT_EQ(services.sink->received(), 0u);

    const PostResult third = post_event(*services.events, "a", "x");
    EXPECT_EQ(third.status, 200);
    ASSERT_TRUE(eventually([&] { return services.sink->received() == 1; }));

    const auto sink_lines = read_jsonl(services.dir + "/sink.jsonl");
    ASSERT_EQ(sink_lines.size(), 1u);
    const SinkLogLine line = sink_log_from_json(sink_lines[0]);
    EXPECT_EQ(line.trigger_id, trigger_id);
    EXPECT_EQ(line.case_index, 0u);
    EXPECT_EQ(line.event_ids.at("a").size(), 3u);
}

TEST(Services, UnmatchedTypeAcksWithZeroDeliveries) {
    Services services;
    services.start();
    services.register_trigger("3:a");
    const PostResult ack = post_event(*services.events, "humidity");
    EXPECT_EQ(ack.status, 200);
    EXPECT_EQ(ack.body.value("deliveredTo", -1), 0);
}

TEST(Services, RegistrationRejectsNotRule) {
    Services services;
    services.start();
    auto res = services.admin->Post(
        "/triggers",
        Json{{"rule", "NOT(1:a)"}, {"functionUrl", services.sink->invoke_url()}}
            .dump(),
        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    const Json body = Json::parse(res->body);
    EXPECT_EQ(body.value("offset", -1), 0);
}

TEST(Services, RegistrationValidatesPartitionsAndUrl) {
    Services services;
    services.start();  // single invoker: replica count is 1
    auto res = services.admin->Post(
        "/triggers",
        Json{{"rule", "1:a"},
             {"functionUrl", services.sink->invoke_url()},
             {"partitions", 2}}
            .dump(),
        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);

    res = services.admin->Post(
        "/triggers",
        Json{{"rule", "1:a"}, {"functionUrl", "not-a-url"}}.dump(),
        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST(Services, DeregisterDropsQueuedEventsAndUnsubscribes) {
    Services services;
    services.start();
    const std::string trigger_id = services.register_trigger("3:a");
    post_event(*services.events, "a");
    post_event(*services.events, "a");

    auto res = services.admin->Delete("/triggers/" + trigger_id);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(Json::parse(res->body).value("droppedEvents", -1), 2);

    auto listing = services.admin->Get("/triggers");
    EXPECT_EQ(Json::parse(listing->body)["triggers"].size(), 0u);

    const PostResult after = post_event(*services.events, "a");
    EXPECT_EQ(after.body.value("deliveredTo", -1), 0);

    res = services.admin->Delete("/triggers/" + trigger_id);
    EXPECT_EQ(res->status, 404);
}

TEST(Services, ListTriggersExposesSnapshotAndStats) {
    Services services;
    services.start();
    const std::string trigger_id = services.register_trigger(
        "OR(AND(5:packetLoss,1:temperature),1:powerConsumption)");
    post_event(*services.events, "packetLoss");
    auto res = services.admin->Get("/triggers");
    const Json body = Json::parse(res->body);
    ASSERT_EQ(body["triggers"].size(), 1u);
    const Json& entry = body["triggers"][0];
    EXPECT_EQ(entry["triggerId"], trigger_id);
    EXPECT_EQ(entry["snapshot"]["queueLengths"]["packetLoss"], 1);
    EXPECT_EQ(entry["snapshot"]["eventsReceived"], 1);
}

TEST(Services, DuplicatePutIsRejected) {
    Services services;
    services.start();
    const Json body{{"rule", "1:a"}, {"functionUrl", services.sink->invoke_url()}};
    auto res = services.admin->Put("/triggers/fixed-id", body.dump(),
                                   "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    res = services.admin->Put("/triggers/fixed-id", body.dump(),
                              "application/json");
    EXPECT_EQ(res->status, 409);
}

TEST(Services, UnknownTypeFrameSignalsRoutingBug) {
    Services services;
    services.start();
    const std::string trigger_id = services.register_trigger("3:a");

    FrameClient frames(services.invokers[0]->event_endpoint());
    EventFrame frame;
    frame.trigger_id = trigger_id;
    frame.event = {"x1", "z", "", now_wall_ns()};
    std::string reply_body;
    ASSERT_TRUE(frames.call(to_json(frame).dump(), reply_body));
    auto reply = frame_reply_from_json(Json::parse(reply_body));
    ASSERT_TRUE(reply.has_value());
    EXPECT_EQ(reply->status, FrameStatus::kUnknownType);

    frame.trigger_id = "no-such-trigger";
    frame.event.type = "a";
    ASSERT_TRUE(frames.call(to_json(frame).dump(), reply_body));
    reply = frame_reply_from_json(Json::parse(reply_body));
    EXPECT_EQ(reply->status, FrameStatus::kUnknownTrigger);
}

TEST(Services, BackpressureSurfacesAsRetryHint) {
    Stack::Config config;
    config.high_water = 3;
    Services services;
    services.start(config);
    services.register_trigger("10:a");

    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(post_event(*services.events, "a").status, 200);
    }
    const PostResult pushed_back = post_event(*services.events, "a");
    EXPECT_EQ(pushed_back.status, 503);
    EXPECT_GT(pushed_back.body.value("retryAfterMs", 0), 0);
    EXPECT_EQ(pushed_back.body.value("deliveredTo", -1), 1);  // matched
}

TEST(Services, AckIsIndependentOfSinkLatency) {
    Stack::Config config;
    config.sink_delay_ms = 500;
    Services services;
    services.start(config);
    services.register_trigger("1:a");  // every event fires

    // Warm the connection, then time acks while the sink sleeps 500ms per
    // invocation. The ack must come back after ingest, not after delivery.
    post_event(*services.events, "a");
    for (int i = 0; i < 5; ++i) {
        const int64_t t0 = now_steady_ns();
        const PostResult ack = post_event(*services.events, "a");
        const int64_t elapsed_ms = (now_steady_ns() - t0) / 1'000'000;
        EXPECT_EQ(ack.status, 200);
        EXPECT_LT(elapsed_ms, 250) << "ack waited on the function";
    }
}

TEST(Services, FailingSinkDoesNotChangeFiringDecisions) {
    std::vector<Json> healthy_firings, failing_firings;
    for (const double failure_rate : {0.0, 1.0}) {
        Stack::Config config;
        config.sink_failure_rate = failure_rate;
        Services services;
        services.start(config);
        const std::string trigger_id = services.register_trigger("2:a");
        for (int i = 0; i < 10; ++i) post_event(*services.events, "a");
        ASSERT_TRUE(eventually([&] { return services.sink->received() == 5; }));

        auto res = services.admin->Get("/triggers");
        const Json entry = Json::parse(res->body)["triggers"][0];
        (failure_rate == 0.0 ? healthy_firings : failing_firings)
            .push_back(entry["snapshot"]["firingsByCase"]);

        if (failure_rate == 1.0) {
            EXPECT_EQ(entry["invocations"]["failed"], 5);
            EXPECT_EQ(entry["invocations"]["delivered"], 0);
        } else {
            EXPECT_EQ(entry["invocations"]["delivered"], 5);
        }
    }
    EXPECT_EQ(healthy_firings, failing_firings);
}

TEST(Services, DispatcherRestartBehavesIdenticallyAfterReannounce) {
    Services services;
    services.start();
    const std::string trigger_id = services.register_trigger("2:a");
    post_event(*services.events, "a");

    // Replace the dispatcher entirely (state lives only in the invoker).
    services.dispatcher->stop();
    services.dispatcher = std::make_unique<DispatcherService>(
        DispatcherService::Options{});
    ASSERT_TRUE(services.dispatcher->start());
    services.events =
        std::make_unique<httplib::Client>(services.dispatcher_url());

    // Fresh dispatcher knows nothing until re-announced to.
    EXPECT_EQ(post_event(*services.events, "a").body.value("deliveredTo", -1),
              0);

    httplib::Client re_announce(services.dispatcher_url());
    const SubscriptionAnnounce announce{
        trigger_id, {"a"}, {services.invokers[0]->event_endpoint()}};
    auto res = re_announce.Post("/subscriptions", to_json(announce).dump(),
                                "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);

    // The queued first event still counts: the next one completes the pair.
    const PostResult ack = post_event(*services.events, "a");
    EXPECT_EQ(ack.body.value("deliveredTo", -1), 1);
    EXPECT_TRUE(eventually([&] { return services.sink->received() == 1; }));
}

TEST(Services, PartitionedTriggerDeliversToExactlyOneReplica) {
    Stack::Config config;
    config.delivery_log = true;
    Services services;
    services.start(config, /*invoker_count=*/2);
    const std::string trigger_id = services.register_trigger("2:a", 2);
    ASSERT_FALSE(trigger_id.empty());

    const int total = 1000;
    for (int i = 0; i < total; ++i) {
        const PostResult ack = post_event(*services.events, "a");
        ASSERT_EQ(ack.status, 200);
        ASSERT_EQ(ack.body.value("deliveredTo", -1), 1);
    }
    ASSERT_TRUE(eventually(
        [&] { return services.sink->received() == total / 2; }, 10000));

    // Delivery log: exactly one entry per event, split across two endpoints.
    const auto delivery = read_jsonl(services.dir + "/delivery.jsonl");
    ASSERT_EQ(delivery.size(), static_cast<size_t>(total));
    std::map<std::string, int> per_endpoint;
    std::set<std::string> event_ids;
    for (const Json& j : delivery) {
        const DeliveryLogLine line = delivery_log_from_json(j);
        EXPECT_EQ(line.status, "ok");
        EXPECT_EQ(line.trigger_id, trigger_id);
        EXPECT_TRUE(event_ids.insert(line.event_id).second)
            << "event delivered twice";
        per_endpoint[line.endpoint]++;
    }
    ASSERT_EQ(per_endpoint.size(), 2u);
    for (const auto& [endpoint, count] : per_endpoint) {
        EXPECT_EQ(count, total / 2) << endpoint;
    }

    // Each replica's own log replays cleanly: arrivals explain firings.
    for (int i = 0; i < 2; ++i) {
        const auto lines =
            read_jsonl(services.dir + "/invoker-" + std::to_string(i) +
                       ".jsonl");
        std::vector<Event> arrivals;
        std::vector<InvokerLogLine> firings;
        for (const Json& j : lines) {
            const InvokerLogLine line = invoker_log_from_json(j);
            if (line.kind == "arrival") {
                Event ev;
                ev.id = line.event_id;
                ev.event_type = line.type;
                arrivals.push_back(std::move(ev));
            } else if (line.kind == "firing") {
                firings.push_back(line);
            }
        }
        EXPECT_EQ(arrivals.size(), static_cast<size_t>(total / 2));
        const auto expected = replay("2:a", arrivals);
        ASSERT_EQ(expected.size(), firings.size());
        for (size_t f = 0; f < expected.size(); ++f) {
            EXPECT_EQ(expected[f].case_index, firings[f].case_index);
            EXPECT_EQ(expected[f].fulfilling_event_id,
                      firings[f].fulfilling_event_id);
        }
    }
}

}  // namespace
}  // namespace met
