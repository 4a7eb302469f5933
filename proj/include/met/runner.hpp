#ifndef MET_RUNNER_HPP
#define MET_RUNNER_HPP

#include <sys/types.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "met/generator.hpp"
#include "met/report.hpp"
#include "met/scenario.hpp"
#include "met/trigger.hpp"

namespace met {

// Binds port 0 and releases it. Callers tolerate the small reuse race by
// retrying their launch.
uint16_t pick_free_port();

// GET base_url/healthz until 200 or the deadline passes.
bool wait_healthy(const std::string& base_url, int timeout_ms = 10000);

class ChildProcess {
  public:
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    // stdout/stderr go to log_path. Returns nullptr when fork/exec fails.
    static std::unique_ptr<ChildProcess> spawn(
        const std::vector<std::string>& argv, const std::string& log_path);

    // SIGTERM, bounded wait, then SIGKILL.
    void terminate(int grace_ms = 5000);
    pid_t pid() const noexcept { return pid_; }

  private:
    explicit ChildProcess(pid_t pid) : pid_(pid) {}
    pid_t pid_ = -1;
};

// ── Cluster of engine processes ─────────────────────────────────────────────

struct ClusterOptions {
    std::string met_bin;  // CLI binary providing the service subcommands
    std::string outdir;
    int dispatchers = 1;
    int invokers = 1;
    bool delivery_logs = false;
    bool invoker_logs = true;
    bool sink_log = true;
    int sink_delay_ms = 0;
    double sink_failure_rate = 0.0;
    int invoke_workers = 8;
    size_t high_water_mark = kDefaultHighWaterMark;
};

// Sink + dispatchers + invokers as real processes on localhost.
class Cluster {
  public:
    static std::unique_ptr<Cluster> launch(const ClusterOptions& options);
    ~Cluster();

    const std::vector<std::string>& dispatcher_urls() const {
        return dispatcher_urls_;
    }
    std::string invoker_admin_url(size_t i) const;
    std::string sink_url() const;  // function URL for registrations

    // POST /triggers at the target invoker; empty function_url means the
    // cluster sink. Returns the assigned trigger id.
    std::optional<std::string> register_trigger(const std::string& rule,
                                                uint32_t partitions = 1,
                                                const std::string& function_url = "",
                                                size_t target_invoker = 0);
    bool deregister_trigger(const std::string& trigger_id,
                            size_t target_invoker = 0);

    // Waits until every invoker reports zero pending invocations.
    bool wait_drained(int timeout_ms = 30'000);

    void shutdown();

    std::vector<std::string> invoker_log_paths() const;
    std::vector<std::string> delivery_log_paths() const;
    std::string sink_log_path() const;
    std::string events_log_path() const;
    const ClusterOptions& options() const { return options_; }

  private:
    Cluster() = default;

    ClusterOptions options_;
    std::vector<std::unique_ptr<ChildProcess>> processes_;
    std::vector<std::string> dispatcher_urls_;
    std::vector<uint16_t> invoker_admin_ports_;
    uint16_t sink_port_ = 0;
};

// ── One-shot scenario run ───────────────────────────────────────────────────

struct RunOptions {
    std::string met_bin;
    std::string outdir;
    bool deterministic = true;
    double compress = 1.0;
    uint64_t seed = 1;
    int sink_delay_ms = 0;
    double sink_failure_rate = 0.0;
    bool delivery_logs = false;
};

struct RunResult {
    GeneratorReport generator;
    ReportResult report;
    std::vector<std::string> trigger_ids;
};

// Launches the scenario topology, registers its triggers, generates the
// traffic, drains, shuts down, and reports. nullopt when the cluster or a
// registration fails.
std::optional<RunResult> run_scenario(const Scenario& scenario,
                                      const RunOptions& options);

}  // namespace met

#endif  // MET_RUNNER_HPP
