#include "met/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "met/replay.hpp"

namespace met {

namespace {

int64_t nearest_rank(const std::vector<int64_t>& sorted, double p) {
    if (sorted.empty()) return 0;
    const size_t rank = static_cast<size_t>(
        std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

struct FiringKey {
    std::string trigger_id;
    std::string fulfilling_event_id;
    size_t case_index;

    auto operator<=>(const FiringKey&) const = default;
};

// Compares one replica's logged firing against the replayed expectation:
// case index and the exact consumed ids per type.
bool firing_matches(const InvokerLogLine& logged, const FiringRecord& expected) {
    if (logged.case_index != expected.case_index) return false;
    if (logged.fulfilling_event_id != expected.fulfilling_event_id) return false;
    if (logged.consumed_ids.size() != expected.consumed.size()) return false;
    for (const auto& [type, events] : expected.consumed) {
        auto it = logged.consumed_ids.find(type);
        if (it == logged.consumed_ids.end()) return false;
        if (it->second.size() != events.size()) return false;
        for (size_t i = 0; i < events.size(); ++i) {
            if (it->second[i] != events[i].id) return false;
        }
    }
    return true;
}

}  // namespace

Percentiles percentiles(std::vector<int64_t> values) {
    Percentiles out;
    out.count = values.size();
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    out.p50 = static_cast<double>(nearest_rank(values, 50));
    out.p95 = static_cast<double>(nearest_rank(values, 95));
    out.p99 = static_cast<double>(nearest_rank(values, 99));
    return out;
}

ReportResult build_report(const ReportInputs& inputs) {
    ReportResult result;
    Json& doc = result.document;
    auto problem = [&result](std::string text) {
        result.problems.push_back(std::move(text));
    };

    // ── Event log ──────────────────────────────────────────────────────────
    std::vector<EventLogLine> events;
    std::map<std::string, size_t> event_by_id;
    for (const Json& j : read_jsonl(inputs.events_path)) {
        events.push_back(event_log_from_json(j));
        event_by_id[events.back().id] = events.size() - 1;
    }

    std::vector<int64_t> ack_latencies;
    int64_t first_created = 0, last_created = 0;
    uint64_t matched_events = 0;
    for (const EventLogLine& ev : events) {
        ack_latencies.push_back(ev.ack_ns);
        if (first_created == 0 || ev.created_at_ns < first_created) {
            first_created = ev.created_at_ns;
        }
        last_created = std::max(last_created, ev.created_at_ns);
        if (ev.deliv_to > 0) ++matched_events;
    }
    const double span_s =
        events.size() > 1
            ? static_cast<double>(last_created - first_created) / 1e9
            : 0.0;
    const Percentiles ack_pct = percentiles(std::move(ack_latencies));

    doc["events"] = Json{{"sent", events.size()},
                         {"matched", matched_events},
                         {"spanSeconds", span_s}};
    doc["ackLatencyNs"] = Json{{"p50", ack_pct.p50},
                               {"p95", ack_pct.p95},
                               {"p99", ack_pct.p99},
                               {"count", ack_pct.count}};
    // Sent over observed span; by construction never exceeds sent/duration.
    doc["throughputRps"] =
        span_s > 0 ? static_cast<double>(events.size()) / span_s : 0.0;

    // ── Invoker logs: replay each replica's arrivals per trigger ──────────
    struct ReplicaTrace {
        std::string rule_text;
        std::vector<Event> arrivals;
        std::vector<InvokerLogLine> firings;
    };
    // (log file index, trigger id) -> trace
    std::map<std::pair<size_t, std::string>, ReplicaTrace> traces;
    std::map<std::string, std::string> rule_by_trigger;

    for (size_t f = 0; f < inputs.invoker_logs.size(); ++f) {
        for (const Json& j : read_jsonl(inputs.invoker_logs[f])) {
            const InvokerLogLine line = invoker_log_from_json(j);
            auto key = std::make_pair(f, line.trigger_id);
            if (line.kind == "trigger") {
                traces[key].rule_text = line.rule_text;
                rule_by_trigger[line.trigger_id] = line.rule_text;
            } else if (line.kind == "arrival") {
                Event ev;
                ev.id = line.event_id;
                ev.event_type = line.type;
                ev.created_at_ns = line.created_at_ns;
                ev.arrival_seq = line.arrival_seq;
                traces[key].arrivals.push_back(std::move(ev));
                if (!events.empty() && event_by_id.count(line.event_id) == 0) {
                    result.hard_failure = true;
                    problem("arrival not present in event log: " +
                            line.event_id);
                }
            } else if (line.kind == "firing") {
                traces[key].firings.push_back(line);
            }
        }
    }

    uint64_t replay_differences = 0;
    uint64_t total_firings = 0;
    std::map<std::string, std::map<size_t, uint64_t>> firings_by_case;
    std::map<FiringKey, uint64_t> firing_multiset;
    // trigger -> virtual minute -> case -> count (needs the event log join)
    std::map<std::string, std::map<int64_t, std::map<size_t, uint64_t>>>
        by_minute;

    auto account_firing = [&](const std::string& trigger_id, size_t case_index,
                              const std::string& fulfilling_id) {
        ++total_firings;
        ++firings_by_case[trigger_id][case_index];
        ++firing_multiset[FiringKey{trigger_id, fulfilling_id, case_index}];
        auto it = event_by_id.find(fulfilling_id);
        if (it != event_by_id.end()) {
            const int64_t minute = events[it->second].virtual_ms / 60000;
            ++by_minute[trigger_id][minute][case_index];
        }
    };

    for (auto& [key, trace] : traces) {
        if (trace.arrivals.empty() && trace.firings.empty()) continue;
        std::string rule_text = trace.rule_text;
        if (rule_text.empty()) rule_text = rule_by_trigger[key.second];
        if (rule_text.empty()) {
            result.hard_failure = true;
            problem("no rule recorded for trigger " + key.second);
            continue;
        }
        std::stable_sort(trace.arrivals.begin(), trace.arrivals.end(),
                         [](const Event& a, const Event& b) {
                             return a.arrival_seq < b.arrival_seq;
                         });
        std::vector<FiringRecord> expected;
        try {
            expected = replay(rule_text, trace.arrivals);
        } catch (const std::exception& e) {
            result.hard_failure = true;
            problem(std::string("replay failed: ") + e.what());
            continue;
        }
        if (expected.size() != trace.firings.size()) {
            replay_differences +=
                std::max(expected.size(), trace.firings.size()) -
                std::min(expected.size(), trace.firings.size());
        }
        const size_t common = std::min(expected.size(), trace.firings.size());
        for (size_t i = 0; i < common; ++i) {
            if (!firing_matches(trace.firings[i], expected[i])) {
                ++replay_differences;
            }
        }
        for (const InvokerLogLine& firing : trace.firings) {
            account_firing(firing.trigger_id, firing.case_index,
                           firing.fulfilling_event_id);
        }
    }

    // ── Fallback verdict without invoker logs ──────────────────────────────
    std::vector<SinkLogLine> sink_lines;
    for (const Json& j : read_jsonl(inputs.sink_path)) {
        sink_lines.push_back(sink_log_from_json(j));
    }

    if (traces.empty() && !inputs.fallback_rule.empty()) {
        std::vector<Event> arrivals;
        for (const EventLogLine& ev : events) {
            Event e;
            e.id = ev.id;
            e.event_type = ev.type;
            e.created_at_ns = ev.created_at_ns;
            arrivals.push_back(std::move(e));
        }
        std::vector<FiringRecord> expected;
        try {
            expected = replay(inputs.fallback_rule, arrivals);
        } catch (const std::exception& e) {
            result.hard_failure = true;
            problem(std::string("replay failed: ") + e.what());
        }
        // Sink receipt order is not the firing order (parallel delivery
        // workers), so compare as multisets of (case, fulfilling event).
        std::map<std::pair<size_t, std::string>, int64_t> delta;
        for (const FiringRecord& record : expected) {
            ++delta[{record.case_index, record.fulfilling_event_id}];
        }
        for (const SinkLogLine& line : sink_lines) {
            --delta[{line.case_index, line.fulfilling_event_id}];
        }
        for (const auto& [key, count] : delta) {
            replay_differences += static_cast<uint64_t>(std::abs(count));
        }
        for (const FiringRecord& record : expected) {
            account_firing(record.trigger_id, record.case_index,
                           record.fulfilling_event_id);
        }
    }

    // ── Sink reconciliation and invocation latency ─────────────────────────
    std::vector<int64_t> invocation_latencies;
    uint64_t unexplained_sink = 0;
    std::map<FiringKey, uint64_t> sink_seen;
    for (const SinkLogLine& line : sink_lines) {
        if (line.latency_ns > 0) invocation_latencies.push_back(line.latency_ns);
        if (!firing_multiset.empty()) {
            const FiringKey key{line.trigger_id, line.fulfilling_event_id,
                                line.case_index};
            if (++sink_seen[key] > firing_multiset[key]) {
                ++unexplained_sink;
                result.hard_failure = true;
                problem("sink firing not present in invoker logs: " +
                        line.fulfilling_event_id);
            }
        }
    }
    if (replay_differences > 0) {
        result.hard_failure = true;
        problem("replay diff: " + std::to_string(replay_differences) +
                " firing difference(s)");
    }

    const Percentiles inv_pct = percentiles(invocation_latencies);
    doc["invocationLatencyNs"] = Json{{"p50", inv_pct.p50},
                                      {"p95", inv_pct.p95},
                                      {"p99", inv_pct.p99},
                                      {"count", inv_pct.count}};

    std::sort(invocation_latencies.begin(), invocation_latencies.end());
    Json cdf = Json::array();
    const size_t n = invocation_latencies.size();
    const size_t step = std::max<size_t>(1, n / 200);
    for (size_t i = 0; i < n; i += step) {
        cdf.push_back(Json::array({invocation_latencies[i],
                                   static_cast<double>(i + 1) / n}));
    }
    if (n > 0 && (n - 1) % step != 0) {
        cdf.push_back(Json::array({invocation_latencies[n - 1], 1.0}));
    }
    doc["latencyCdf"] = std::move(cdf);

    // ── Ratio, splits, verdict ──────────────────────────────────────────────
    Json ratio{{"events", events.size()},
               {"firings", total_firings},
               {"defined", total_firings > 0}};
    if (total_firings > 0) {
        ratio["value"] =
            static_cast<double>(events.size()) / static_cast<double>(total_firings);
    }
    doc["invocationRatio"] = std::move(ratio);

    Json by_case = Json::object();
    for (const auto& [trigger, cases] : firings_by_case) {
        Json c = Json::object();
        for (const auto& [index, count] : cases) {
            c[std::to_string(index)] = count;
        }
        by_case[trigger] = std::move(c);
    }
    doc["firingsByCase"] = std::move(by_case);

    Json minutes = Json::object();
    for (const auto& [trigger, per_minute] : by_minute) {
        Json m = Json::object();
        for (const auto& [minute, cases] : per_minute) {
            Json c = Json::object();
            for (const auto& [index, count] : cases) {
                c[std::to_string(index)] = count;
            }
            m[std::to_string(minute)] = std::move(c);
        }
        minutes[trigger] = std::move(m);
    }
    doc["firingsByMinute"] = std::move(minutes);

    doc["sink"] = Json{{"records", sink_lines.size()},
                       {"unexplained", unexplained_sink}};

    // ── Delivery logs ───────────────────────────────────────────────────────
    if (!inputs.delivery_logs.empty()) {
        uint64_t delivery_entries = 0, delivery_ok = 0;
        std::map<std::pair<std::string, std::string>, uint64_t> per_pair;
        bool duplicate = false;
        for (const std::string& path : inputs.delivery_logs) {
            for (const Json& j : read_jsonl(path)) {
                const DeliveryLogLine line = delivery_log_from_json(j);
                ++delivery_entries;
                if (line.status == "ok") ++delivery_ok;
                if (++per_pair[{line.event_id, line.trigger_id}] > 1) {
                    duplicate = true;
                }
            }
        }
        if (duplicate) {
            result.hard_failure = true;
            problem("duplicate (event, trigger) delivery entry");
        }
        doc["delivery"] = Json{{"entries", delivery_entries},
                               {"ok", delivery_ok},
                               {"duplicates", duplicate}};
    }

    doc["verdict"] = Json{
        {"ok", !result.hard_failure},
        {"replayDifferences", replay_differences},
        {"problems", result.problems},
    };
    return result;
}

bool write_report(const ReportResult& result, const std::string& out_path,
                  const std::string& cdf_path) {
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) return false;
        out << result.document.dump(2) << '\n';
    }
    if (!cdf_path.empty()) {
        std::ofstream out(cdf_path);
        if (!out) return false;
        out << "latency_ns,fraction\n";
        for (const Json& point : result.document.value("latencyCdf", Json::array())) {
            out << point[0].get<int64_t>() << ',' << point[1].get<double>()
                << '\n';
        }
    }
    return true;
}

}  // namespace met
