#include "met/generator.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <memory>
#include <random>
#include <thread>

#include "httplib.h"
#include "met/base64.hpp"
#include "met/clock.hpp"

namespace met {

namespace {

std::string random_printable(std::mt19937_64& rng, size_t n) {
    static constexpr char kChars[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    std::uniform_int_distribution<size_t> dist(0, sizeof(kChars) - 2);
    std::string out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(kChars[dist(rng)]);
    return out;
}

struct PostOutcome {
    bool transport_ok = false;
    int status = 0;
    std::string event_id;
    int delivered_to = 0;
};

PostOutcome post_event(httplib::Client& client, const std::string& type,
                       const std::string& payload_b64, int64_t created_at) {
    const std::string body = Json{{"type", type},
                                  {"payload", payload_b64},
                                  {"createdAt", created_at}}
                                 .dump();
    PostOutcome outcome;
    auto result = client.Post("/events", body, "application/json");
    if (!result) return outcome;
    outcome.transport_ok = true;
    outcome.status = result->status;
    const Json reply = Json::parse(result->body, nullptr, false);
    if (reply.is_object()) {
        outcome.event_id = reply.value("eventId", "");
        outcome.delivered_to = reply.value("deliveredTo", 0);
    }
    return outcome;
}

std::unique_ptr<httplib::Client> make_client(const std::string& base) {
    auto client = std::make_unique<httplib::Client>(base);
    client->set_connection_timeout(5, 0);
    client->set_read_timeout(30, 0);
    client->set_keep_alive(true);
    return client;
}

}  // namespace

GeneratorReport generate(const Scenario& scenario, const GeneratorOptions& opts) {
    GeneratorReport report;
    if (opts.dispatchers.empty()) {
        spdlog::error("generate: no dispatcher endpoints");
        return report;
    }
    JsonlWriter log;
    if (!opts.out_path.empty() && !log.open(opts.out_path)) {
        spdlog::error("generate: cannot open event log {}", opts.out_path);
        return report;
    }
    const double compress = opts.compress > 0 ? opts.compress : 1.0;

    if (opts.deterministic) {
        std::vector<std::unique_ptr<httplib::Client>> clients;
        for (const std::string& d : opts.dispatchers) {
            clients.push_back(make_client(d));
        }
        std::mt19937_64 rng(opts.seed);
        const auto schedule = deterministic_schedule(scenario);
        const auto start = std::chrono::steady_clock::now();
        report.wall_start_ns = now_wall_ns();
        uint64_t seq = 0;
        for (const ScheduledEvent& planned : schedule) {
            const auto due = start + std::chrono::microseconds(static_cast<int64_t>(
                                         planned.virtual_ms * 1000.0 / compress));
            std::this_thread::sleep_until(due);  // no-op once behind
            const EventStream& stream = scenario.streams[planned.stream_index];
            const std::string payload_b64 = base64_encode(
                random_printable(rng, stream.payload_bytes));
            const int64_t created_at = now_wall_ns();
            const int64_t t0 = now_steady_ns();
            PostOutcome outcome =
                post_event(*clients[seq % clients.size()], stream.event_type,
                           payload_b64, created_at);
            const int64_t ack_ns = now_steady_ns() - t0;
            ++report.sent;
            if (!outcome.transport_ok) {
                ++report.failed;
            } else if (outcome.status == 200) {
                ++report.acked;
            } else if (outcome.status == 503) {
                ++report.backpressured;
            } else {
                ++report.failed;
            }
            if (opts.collect_acks) report.ack_ns.push_back(ack_ns);
            if (log.is_open()) {
                log.write(to_json(EventLogLine{outcome.event_id,
                                               stream.event_type, created_at,
                                               planned.virtual_ms, seq, ack_ns,
                                               outcome.delivered_to}));
            }
            ++seq;
        }
        report.wall_end_ns = now_wall_ns();
        return report;
    }

    // Stochastic mode: one loop per virtual user with jittered gaps.
    std::atomic<uint64_t> seq{0};
    std::atomic<uint64_t> sent{0}, acked{0}, failed{0}, backpressured{0};
    std::mutex ack_mu;
    std::vector<int64_t> all_acks;
    report.wall_start_ns = now_wall_ns();
    const auto start = std::chrono::steady_clock::now();
    const int64_t start_steady_ns = now_steady_ns();
    const auto deadline =
        start + std::chrono::microseconds(static_cast<int64_t>(
                    scenario.duration_seconds * 1e6 / compress));

    std::vector<std::thread> threads;
    size_t user_index = 0;
    for (size_t i = 0; i < scenario.streams.size(); ++i) {
        const EventStream& stream = scenario.streams[i];
        if (stream.rate_per_minute <= 0) continue;
        for (int u = 0; u < stream.virtual_users; ++u, ++user_index) {
            threads.emplace_back([&, i, user_index] {
                const EventStream& st = scenario.streams[i];
                std::mt19937_64 rng(opts.seed * 1315423911u + user_index);
                std::uniform_real_distribution<double> jitter(0.5, 1.5);
                const double mean_gap_us =
                    60e6 / st.rate_per_minute * st.virtual_users / compress;
                auto client = make_client(
                    opts.dispatchers[user_index % opts.dispatchers.size()]);
                auto next = std::chrono::steady_clock::now();
                while (true) {
                    next += std::chrono::microseconds(static_cast<int64_t>(
                        mean_gap_us * jitter(rng)));
                    if (next > deadline) break;
                    std::this_thread::sleep_until(next);
                    const std::string payload_b64 = base64_encode(
                        random_printable(rng, st.payload_bytes));
                    const int64_t created_at = now_wall_ns();
                    const int64_t t0 = now_steady_ns();
                    PostOutcome outcome = post_event(*client, st.event_type,
                                                     payload_b64, created_at);
                    const int64_t ack_ns = now_steady_ns() - t0;
                    const uint64_t my_seq = seq.fetch_add(1);
                    sent.fetch_add(1);
                    if (!outcome.transport_ok) {
                        failed.fetch_add(1);
                    } else if (outcome.status == 200) {
                        acked.fetch_add(1);
                    } else if (outcome.status == 503) {
                        backpressured.fetch_add(1);
                    } else {
                        failed.fetch_add(1);
                    }
                    const int64_t virtual_ms = static_cast<int64_t>(
                        (t0 - start_steady_ns) / 1e6 * compress);
                    if (opts.collect_acks) {
                        std::lock_guard<std::mutex> lock(ack_mu);
                        all_acks.push_back(ack_ns);
                    }
                    if (log.is_open()) {
                        log.write(to_json(EventLogLine{
                            outcome.event_id, st.event_type, created_at,
                            virtual_ms, my_seq, ack_ns, outcome.delivered_to}));
                    }
                }
            });
        }
    }
    for (std::thread& t : threads) t.join();
    report.wall_end_ns = now_wall_ns();
    report.sent = sent.load();
    report.acked = acked.load();
    report.failed = failed.load();
    report.backpressured = backpressured.load();
    report.ack_ns = std::move(all_acks);
    return report;
}

BlastResult blast(const BlastOptions& opts) {
    BlastResult result;
    if (opts.dispatchers.empty() || opts.types.empty()) return result;

    std::atomic<uint64_t> sent{0}, acked{0}, failed{0};
    std::atomic<bool> go{false}, stop{false};
    std::vector<std::thread> threads;
    threads.reserve(opts.clients);
    for (int c = 0; c < opts.clients; ++c) {
        threads.emplace_back([&, c] {
            std::mt19937_64 rng(opts.seed * 2654435761u + c);
            // Payload content is opaque to the engine; one random buffer per
            // client keeps the generator itself off the measured path.
            const std::string payload_b64 =
                base64_encode(random_printable(rng, opts.payload_bytes));
            auto client =
                make_client(opts.dispatchers[c % opts.dispatchers.size()]);
            size_t type_index = c % opts.types.size();
            // Prime the connection before the measured window.
            post_event(*client, opts.types[type_index], payload_b64,
                       now_wall_ns());
            while (!go.load(std::memory_order_acquire)) {
                std::this_thread::yield();
            }
            while (!stop.load(std::memory_order_relaxed)) {
                const PostOutcome outcome =
                    post_event(*client, opts.types[type_index], payload_b64,
                               now_wall_ns());
                type_index = (type_index + 1) % opts.types.size();
                sent.fetch_add(1, std::memory_order_relaxed);
                if (outcome.transport_ok && outcome.status == 200) {
                    acked.fetch_add(1, std::memory_order_relaxed);
                } else {
                    failed.fetch_add(1, std::memory_order_relaxed);
                }
            }
        });
    }

    const auto t0 = std::chrono::steady_clock::now();
    go.store(true, std::memory_order_release);
    std::this_thread::sleep_for(std::chrono::duration<double>(opts.duration_s));
    stop.store(true);
    for (std::thread& t : threads) t.join();
    const auto t1 = std::chrono::steady_clock::now();

    result.sent = sent.load();
    result.acked = acked.load();
    result.failed = failed.load();
    result.duration_s = std::chrono::duration<double>(t1 - t0).count();
    return result;
}

}  // namespace met
