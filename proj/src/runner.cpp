#include "met/runner.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <spdlog/spdlog.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "httplib.h"

namespace met {

namespace fs = std::filesystem;

uint16_t pick_free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return 0;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    uint16_t port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
        socklen_t len = sizeof(addr);
        if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
            port = ntohs(addr.sin_port);
        }
    }
    ::close(fd);
    return port;
}

bool wait_healthy(const std::string& base_url, int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        httplib::Client client(base_url);
        client.set_connection_timeout(0, 200'000);  // 200ms
        client.set_read_timeout(1, 0);
        auto result = client.Get("/healthz");
        if (result && result->status == 200) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return false;
}

ChildProcess::~ChildProcess() { terminate(); }

std::unique_ptr<ChildProcess> ChildProcess::spawn(
    const std::vector<std::string>& argv, const std::string& log_path) {
    if (argv.empty()) return nullptr;
    const pid_t pid = ::fork();
    if (pid < 0) return nullptr;
    if (pid == 0) {
        const int fd = ::open(log_path.c_str(),
                              O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            ::dup2(fd, STDOUT_FILENO);
            ::dup2(fd, STDERR_FILENO);
            ::close(fd);
        }
        std::vector<char*> c_argv;
        c_argv.reserve(argv.size() + 1);
        for (const std::string& arg : argv) {
            c_argv.push_back(const_cast<char*>(arg.c_str()));
        }
        c_argv.push_back(nullptr);
        ::execv(c_argv[0], c_argv.data());
        ::_exit(127);
    }
    return std::unique_ptr<ChildProcess>(new ChildProcess(pid));
}

void ChildProcess::terminate(int grace_ms) {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGTERM);
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(grace_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        int status = 0;
        const pid_t done = ::waitpid(pid_, &status, WNOHANG);
        if (done == pid_ || (done < 0 && errno == ECHILD)) {
            pid_ = -1;
            return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
}

// ── Cluster ─────────────────────────────────────────────────────────────────

std::unique_ptr<Cluster> Cluster::launch(const ClusterOptions& options) {
    auto cluster = std::unique_ptr<Cluster>(new Cluster());
    cluster->options_ = options;
    const fs::path outdir(options.outdir);
    std::error_code ec;
    fs::create_directories(outdir / "logs", ec);
    if (ec) {
        spdlog::error("cluster: cannot create {}: {}", options.outdir,
                      ec.message());
        return nullptr;
    }
    const auto path_str = [&outdir](const std::string& name) {
        return (outdir / name).string();
    };

    // Sink first: registrations point at it.
    cluster->sink_port_ = pick_free_port();
    {
        std::vector<std::string> argv{
            options.met_bin, "sink",
            "--port", std::to_string(cluster->sink_port_)};
        if (options.sink_log) {
            argv.insert(argv.end(), {"--out", path_str("sink.jsonl")});
        }
        if (options.sink_delay_ms > 0) {
            argv.insert(argv.end(),
                        {"--delay-ms", std::to_string(options.sink_delay_ms)});
        }
        if (options.sink_failure_rate > 0) {
            argv.insert(argv.end(), {"--failure-rate",
                                     std::to_string(options.sink_failure_rate)});
        }
        auto proc = ChildProcess::spawn(argv, path_str("logs/sink.log"));
        if (!proc) return nullptr;
        cluster->processes_.push_back(std::move(proc));
        if (!wait_healthy("http://127.0.0.1:" +
                          std::to_string(cluster->sink_port_))) {
            spdlog::error("cluster: sink did not become healthy");
            return nullptr;
        }
    }

    for (int i = 0; i < options.dispatchers; ++i) {
        const uint16_t port = pick_free_port();
        std::vector<std::string> argv{options.met_bin, "dispatcher", "--port",
                                      std::to_string(port)};
        if (options.delivery_logs) {
            argv.insert(argv.end(),
                        {"--delivery-log",
                         path_str("dispatcher-" + std::to_string(i) +
                                  "-delivery.jsonl")});
        }
        auto proc = ChildProcess::spawn(
            argv, path_str("logs/dispatcher-" + std::to_string(i) + ".log"));
        if (!proc) return nullptr;
        cluster->processes_.push_back(std::move(proc));
        const std::string url = "http://127.0.0.1:" + std::to_string(port);
        if (!wait_healthy(url)) {
            spdlog::error("cluster: dispatcher {} did not become healthy", i);
            return nullptr;
        }
        cluster->dispatcher_urls_.push_back(url);
    }

    // All invoker ports are fixed up front so each can name its peers.
    std::vector<uint16_t> admin_ports, event_ports;
    for (int i = 0; i < options.invokers; ++i) {
        admin_ports.push_back(pick_free_port());
        event_ports.push_back(pick_free_port());
    }
    for (int i = 0; i < options.invokers; ++i) {
        std::vector<std::string> argv{
            options.met_bin, "invoker",
            "--id", "inv-" + std::to_string(i),
            "--admin-port", std::to_string(admin_ports[i]),
            "--event-port", std::to_string(event_ports[i]),
            "--invoke-workers", std::to_string(options.invoke_workers),
            "--high-water", std::to_string(options.high_water_mark)};
        for (const std::string& d : cluster->dispatcher_urls_) {
            argv.insert(argv.end(), {"--dispatcher", d});
        }
        for (int p = 0; p < options.invokers; ++p) {
            if (p == i) continue;
            argv.insert(argv.end(),
                        {"--peer", "http://127.0.0.1:" +
                                       std::to_string(admin_ports[p]) + "#" +
                                       "127.0.0.1:" +
                                       std::to_string(event_ports[p])});
        }
        if (options.invoker_logs) {
            argv.insert(argv.end(),
                        {"--log", path_str("invoker-" + std::to_string(i) +
                                           ".jsonl")});
        }
        auto proc = ChildProcess::spawn(
            argv, path_str("logs/invoker-" + std::to_string(i) + ".log"));
        if (!proc) return nullptr;
        cluster->processes_.push_back(std::move(proc));
        const std::string url =
            "http://127.0.0.1:" + std::to_string(admin_ports[i]);
        if (!wait_healthy(url)) {
            spdlog::error("cluster: invoker {} did not become healthy", i);
            return nullptr;
        }
        cluster->invoker_admin_ports_.push_back(admin_ports[i]);
    }
    return cluster;
}

Cluster::~Cluster() { shutdown(); }

std::string Cluster::invoker_admin_url(size_t i) const {
    return "http://127.0.0.1:" + std::to_string(invoker_admin_ports_.at(i));
}

std::string Cluster::sink_url() const {
    return "http://127.0.0.1:" + std::to_string(sink_port_) + "/invoke";
}

std::optional<std::string> Cluster::register_trigger(
    const std::string& rule, uint32_t partitions,
    const std::string& function_url, size_t target_invoker) {
    httplib::Client client(invoker_admin_url(target_invoker));
    client.set_read_timeout(30, 0);
    const Json body{{"rule", rule},
                    {"functionUrl",
                     function_url.empty() ? sink_url() : function_url},
                    {"partitions", partitions}};
    auto result = client.Post("/triggers", body.dump(), "application/json");
    if (!result || result->status != 201) {
        spdlog::error("register_trigger '{}' failed: {}", rule,
                      result ? result->body : "no response");
        return std::nullopt;
    }
    const Json reply = Json::parse(result->body, nullptr, false);
    if (!reply.is_object() || !reply.contains("triggerId")) return std::nullopt;
    return reply["triggerId"].get<std::string>();
}

bool Cluster::deregister_trigger(const std::string& trigger_id,
                                 size_t target_invoker) {
    httplib::Client client(invoker_admin_url(target_invoker));
    auto result = client.Delete("/triggers/" + trigger_id);
    return result && result->status == 200;
}

bool Cluster::wait_drained(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        bool drained = true;
        for (size_t i = 0; i < invoker_admin_ports_.size(); ++i) {
            httplib::Client client(invoker_admin_url(i));
            auto result = client.Get("/metrics");
            if (!result || result->status != 200) {
                drained = false;
                break;
            }
            const Json metrics = Json::parse(result->body, nullptr, false);
            if (!metrics.is_object() ||
                metrics.value("pendingInvocations", size_t{1}) != 0) {
                drained = false;
                break;
            }
        }
        if (drained) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return false;
}

void Cluster::shutdown() {
    // Invokers first (they may still invoke the sink), then dispatchers,
    // then the sink.
    for (auto it = processes_.rbegin(); it != processes_.rend(); ++it) {
        (*it)->terminate();
    }
    processes_.clear();
}

std::vector<std::string> Cluster::invoker_log_paths() const {
    std::vector<std::string> paths;
    if (!options_.invoker_logs) return paths;
    for (size_t i = 0; i < invoker_admin_ports_.size(); ++i) {
        paths.push_back(
            (fs::path(options_.outdir) / ("invoker-" + std::to_string(i) +
                                          ".jsonl"))
                .string());
    }
    return paths;
}

std::vector<std::string> Cluster::delivery_log_paths() const {
    std::vector<std::string> paths;
    if (!options_.delivery_logs) return paths;
    for (size_t i = 0; i < dispatcher_urls_.size(); ++i) {
        paths.push_back(
            (fs::path(options_.outdir) / ("dispatcher-" + std::to_string(i) +
                                          "-delivery.jsonl"))
                .string());
    }
    return paths;
}

std::string Cluster::sink_log_path() const {
    return (fs::path(options_.outdir) / "sink.jsonl").string();
}

std::string Cluster::events_log_path() const {
    return (fs::path(options_.outdir) / "events.jsonl").string();
}

// ── Scenario run ────────────────────────────────────────────────────────────

std::optional<RunResult> run_scenario(const Scenario& scenario,
                                      const RunOptions& options) {
    ClusterOptions cluster_options;
    cluster_options.met_bin = options.met_bin;
    cluster_options.outdir = options.outdir;
    cluster_options.dispatchers = scenario.topology.dispatchers;
    cluster_options.invokers = scenario.topology.invokers;
    cluster_options.delivery_logs = options.delivery_logs;
    cluster_options.sink_delay_ms = options.sink_delay_ms;
    cluster_options.sink_failure_rate = options.sink_failure_rate;

    auto cluster = Cluster::launch(cluster_options);
    if (!cluster) return std::nullopt;

    RunResult run;
    for (const ScenarioTrigger& trigger : scenario.triggers) {
        auto id = cluster->register_trigger(trigger.rule_text,
                                            trigger.partitions,
                                            trigger.function_url);
        if (!id) return std::nullopt;
        run.trigger_ids.push_back(*id);
    }

    GeneratorOptions generator_options;
    generator_options.dispatchers = cluster->dispatcher_urls();
    generator_options.out_path = cluster->events_log_path();
    generator_options.deterministic = options.deterministic;
    generator_options.compress = options.compress;
    generator_options.seed = options.seed;
    run.generator = generate(scenario, generator_options);

    cluster->wait_drained();
    cluster->shutdown();

    ReportInputs inputs;
    inputs.events_path = cluster->events_log_path();
    inputs.invoker_logs = cluster->invoker_log_paths();
    inputs.sink_path = cluster->sink_log_path();
    inputs.delivery_logs = cluster->delivery_log_paths();
    run.report = build_report(inputs);
    run.report.document["generator"] =
        Json{{"sent", run.generator.sent},
             {"acked", run.generator.acked},
             {"failed", run.generator.failed},
             {"backpressured", run.generator.backpressured},
             {"durationSeconds", run.generator.duration_seconds()}};
    return run;
}

}  // namespace met
