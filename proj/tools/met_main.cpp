// met — multi-event trigger engine CLI.
//
// Service subcommands (dispatcher, invoker, sink) run until SIGTERM/SIGINT.
// Harness subcommands (generate, replay, report, run) execute and exit.

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <climits>
#include <cstdio>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "met/dispatcher.hpp"
#include "met/generator.hpp"
#include "met/invoker.hpp"
#include "met/replay.hpp"
#include "met/report.hpp"
#include "met/runner.hpp"
#include "met/scenario.hpp"
#include "met/sink.hpp"

namespace {

using met::Json;

// Blocks the termination signals before service threads start, then waits.
int serve_until_signal(const std::function<bool()>& start,
                       const std::function<void()>& stop) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    if (!start()) return 1;
    int sig = 0;
    sigwait(&set, &sig);
    stop();
    return 0;
}

std::string self_binary_path() {
    char buf[PATH_MAX];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return "met";
    buf[n] = '\0';
    return std::string(buf);
}

std::vector<met::Event> events_from_log(const std::string& path) {
    std::vector<met::Event> events;
    for (const Json& j : met::read_jsonl(path)) {
        met::Event ev;
        if (j.value("kind", "") == "arrival") {
            const met::InvokerLogLine line = met::invoker_log_from_json(j);
            ev.id = line.event_id;
            ev.event_type = line.type;
            ev.created_at_ns = line.created_at_ns;
        } else if (j.contains("kind")) {
            continue;  // other invoker-log record kinds
        } else {
            const met::EventLogLine line = met::event_log_from_json(j);
            ev.id = line.id;
            ev.event_type = line.type;
            ev.created_at_ns = line.created_at_ns;
        }
        events.push_back(std::move(ev));
    }
    return events;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"met — multi-event trigger engine"};
    app.require_subcommand(1);

    // ── dispatcher ──────────────────────────────────────────────────────────
    auto* dispatcher_cmd =
        app.add_subcommand("dispatcher", "run an event dispatcher");
    met::DispatcherService::Options dispatcher_options;
    dispatcher_cmd->add_option("--port", dispatcher_options.port,
                               "HTTP port (0 = ephemeral)");
    dispatcher_cmd->add_option("--delivery-log", dispatcher_options.delivery_log,
                               "JSONL delivery log path");
    dispatcher_cmd->add_option("--threads", dispatcher_options.http_threads,
                               "HTTP worker threads");
    dispatcher_cmd->callback([&dispatcher_options] {
        met::DispatcherService service(dispatcher_options);
        std::exit(serve_until_signal([&] { return service.start(); },
                                     [&] { service.stop(); }));
    });

    // ── invoker ─────────────────────────────────────────────────────────────
    auto* invoker_cmd = app.add_subcommand("invoker", "run a trigger invoker");
    met::InvokerService::Options invoker_options;
    std::vector<std::string> peer_specs;
    invoker_cmd->add_option("--id", invoker_options.invoker_id, "invoker id");
    invoker_cmd->add_option("--admin-port", invoker_options.admin_port,
                            "admin HTTP port (0 = ephemeral)");
    invoker_cmd->add_option("--event-port", invoker_options.event_port,
                            "frame listener port (0 = ephemeral)");
    invoker_cmd->add_option("--advertised-host", invoker_options.advertised_host,
                            "host announced in subscriptions");
    invoker_cmd->add_option("--dispatcher", invoker_options.dispatchers,
                            "dispatcher admin URL (repeatable)");
    invoker_cmd->add_option("--peer", peer_specs,
                            "peer replica, adminUrl#host:port (repeatable)");
    invoker_cmd->add_option("--log", invoker_options.log_path,
                            "JSONL arrival/firing log path");
    invoker_cmd->add_option("--invoke-workers", invoker_options.invoke_workers,
                            "function invocation workers");
    invoker_cmd->add_option("--pending-cap", invoker_options.pending_cap,
                            "pending invocation queue cap");
    invoker_cmd->add_option("--high-water", invoker_options.high_water_mark,
                            "per-type trigger set high-water mark");
    invoker_cmd->callback([&invoker_options, &peer_specs] {
        for (const std::string& spec : peer_specs) {
            const size_t hash = spec.find('#');
            if (hash == std::string::npos || hash == 0 ||
                hash + 1 >= spec.size()) {
                std::cerr << "bad --peer (want adminUrl#host:port): " << spec
                          << "\n";
                std::exit(2);
            }
            invoker_options.peers.push_back(
                {spec.substr(0, hash), spec.substr(hash + 1)});
        }
        met::InvokerService service(invoker_options);
        std::exit(serve_until_signal([&] { return service.start(); },
                                     [&] { service.stop(); }));
    });

    // ── sink ────────────────────────────────────────────────────────────────
    auto* sink_cmd = app.add_subcommand("sink", "run the mock function sink");
    met::SinkServer::Options sink_options;
    sink_cmd->add_option("--port", sink_options.port, "HTTP port");
    sink_cmd->add_option("--out", sink_options.log_path, "JSONL firing log");
    sink_cmd->add_option("--delay-ms", sink_options.delay_ms,
                         "artificial response delay");
    sink_cmd->add_option("--failure-rate", sink_options.failure_rate,
                         "probability of responding 500");
    sink_cmd->add_option("--threads", sink_options.http_threads,
                         "HTTP worker threads");
    sink_cmd->add_option("--seed", sink_options.seed, "failure sampling seed");
    sink_cmd->callback([&sink_options] {
        met::SinkServer service(sink_options);
        std::exit(serve_until_signal([&] { return service.start(); },
                                     [&] { service.stop(); }));
    });

    // ── generate ────────────────────────────────────────────────────────────
    auto* generate_cmd =
        app.add_subcommand("generate", "emit scenario traffic");
    std::string scenario_path, mode = "deterministic";
    met::GeneratorOptions generator_options;
    generate_cmd->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();
    generate_cmd
        ->add_option("--dispatcher", generator_options.dispatchers,
                     "dispatcher base URL (repeatable)")
        ->required();
    generate_cmd->add_option("--out", generator_options.out_path,
                             "event log JSONL path");
    generate_cmd->add_option("--mode", mode, "deterministic|stochastic");
    generate_cmd->add_option("--compress", generator_options.compress,
                             "time compression factor");
    generate_cmd->add_option("--seed", generator_options.seed, "payload seed");
    generate_cmd->callback([&] {
        const met::Scenario scenario = met::load_scenario(scenario_path);
        generator_options.deterministic = (mode != "stochastic");
        const met::GeneratorReport report =
            met::generate(scenario, generator_options);
        std::cout << Json{{"sent", report.sent},
                          {"acked", report.acked},
                          {"failed", report.failed},
                          {"backpressured", report.backpressured},
                          {"durationSeconds", report.duration_seconds()},
                          {"throughputRps", report.throughput_rps()}}
                         .dump(2)
                  << "\n";
        std::exit(report.failed == 0 ? 0 : 1);
    });

    // ── replay ──────────────────────────────────────────────────────────────
    auto* replay_cmd = app.add_subcommand(
        "replay", "replay an event log against a rule (reference evaluator)");
    std::string replay_rule, replay_events, replay_out;
    replay_cmd->add_option("--rule", replay_rule, "trigger rule text")
        ->required();
    replay_cmd->add_option("--events", replay_events, "event log JSONL")
        ->required();
    replay_cmd->add_option("--out", replay_out, "firing log JSONL output");
    replay_cmd->callback([&] {
        const auto events = events_from_log(replay_events);
        std::vector<met::FiringRecord> firings;
        try {
            firings = met::replay(replay_rule, events);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            std::exit(2);
        }
        if (!replay_out.empty()) {
            met::JsonlWriter out(replay_out);
            for (const met::FiringRecord& record : firings) {
                met::InvokerLogLine line;
                line.kind = "firing";
                line.trigger_id = record.trigger_id;
                line.case_index = record.case_index;
                line.fulfilling_event_id = record.fulfilling_event_id;
                for (const auto& [type, consumed] : record.consumed) {
                    auto& ids = line.consumed_ids[type];
                    for (const met::Event& ev : consumed) ids.push_back(ev.id);
                }
                out.write(to_json(line));
            }
        }
        Json summary{{"events", events.size()}, {"firings", firings.size()}};
        if (!firings.empty()) {
            summary["ratio"] =
                static_cast<double>(events.size()) / firings.size();
        }
        std::cout << summary.dump(2) << "\n";
    });

    // ── report ──────────────────────────────────────────────────────────────
    auto* report_cmd =
        app.add_subcommand("report", "compute metrics and verify logs");
    met::ReportInputs report_inputs;
    std::string report_out = "metrics.json", report_cdf;
    report_cmd->add_option("--events", report_inputs.events_path,
                           "generator event log");
    report_cmd->add_option("--invoker-log", report_inputs.invoker_logs,
                           "invoker JSONL log (repeatable)");
    report_cmd->add_option("--sink", report_inputs.sink_path, "sink JSONL log");
    report_cmd->add_option("--delivery-log", report_inputs.delivery_logs,
                           "dispatcher delivery log (repeatable)");
    report_cmd->add_option("--rule", report_inputs.fallback_rule,
                           "rule for replay when no invoker logs exist");
    report_cmd->add_option("--out", report_out, "metrics JSON output");
    report_cmd->add_option("--cdf", report_cdf, "latency CDF CSV output");
    report_cmd->callback([&] {
        const met::ReportResult result = met::build_report(report_inputs);
        met::write_report(result, report_out, report_cdf);
        std::cout << result.document.dump(2) << "\n";
        std::exit(result.hard_failure ? 1 : 0);
    });

    // ── run ─────────────────────────────────────────────────────────────────
    auto* run_cmd =
        app.add_subcommand("run", "orchestrate a full scenario run");
    std::string run_scenario_path, run_outdir = "out", run_mode = "deterministic";
    met::RunOptions run_options;
    run_cmd->add_option("--scenario", run_scenario_path, "scenario JSON file")
        ->required();
    run_cmd->add_option("--outdir", run_outdir, "output directory");
    run_cmd->add_option("--mode", run_mode, "deterministic|stochastic");
    run_cmd->add_option("--compress", run_options.compress,
                        "time compression factor");
    run_cmd->add_option("--seed", run_options.seed, "generator seed");
    run_cmd->add_option("--sink-delay-ms", run_options.sink_delay_ms,
                        "sink artificial delay");
    run_cmd->add_option("--sink-failure-rate", run_options.sink_failure_rate,
                        "sink failure rate");
    run_cmd->add_flag("--delivery-logs", run_options.delivery_logs,
                      "write dispatcher delivery logs");
    run_cmd->callback([&] {
        const met::Scenario scenario = met::load_scenario(run_scenario_path);
        run_options.met_bin = self_binary_path();
        run_options.outdir = run_outdir;
        run_options.deterministic = (run_mode != "stochastic");
        auto result = met::run_scenario(scenario, run_options);
        if (!result) {
            std::cerr << "run failed (cluster or registration error)\n";
            std::exit(2);
        }
        met::write_report(result->report, run_outdir + "/metrics.json",
                          run_outdir + "/cdf.csv");
        std::cout << result->report.document.dump(2) << "\n";
        std::exit(result->report.hard_failure ? 1 : 0);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
