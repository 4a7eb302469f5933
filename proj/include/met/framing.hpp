// ============================================================================
// met/framing.hpp — length-prefixed frames over persistent TCP
// ============================================================================
//
// The dispatcher->invoker event path uses persistent TCP connections
// carrying frames of the form
//
//   [4-byte big-endian body length][JSON body]
//
// The byte layout of the prefix is fixed; the body is JSON. Each request
// frame is answered by exactly one reply frame on the same connection, in
// order, so a client call is send + recv under a lock.
//
// ============================================================================

#ifndef MET_FRAMING_HPP
#define MET_FRAMING_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace met {

inline constexpr size_t kMaxFrameBytes = 16u << 20;

// 4-byte big-endian length followed by the body, as one buffer.
std::string encode_frame(std::string_view body);

// "host:port" -> (host, port); nullopt if malformed.
std::optional<std::pair<std::string, uint16_t>> parse_endpoint(
    std::string_view endpoint);

enum class FrameIoResult : uint8_t { kOk, kClosed, kError, kTooBig };

// Blocking frame I/O on a connected socket.
FrameIoResult read_frame(int fd, std::string& body);
bool write_frame(int fd, std::string_view body);

// ── Client ──────────────────────────────────────────────────────────────────

// One persistent connection. call() serializes request/reply pairs; a failed
// call marks the connection broken and the next call reconnects first, so
// delivery of any single frame is attempted at most once.
class FrameClient {
  public:
    explicit FrameClient(std::string endpoint);
    ~FrameClient();

    FrameClient(const FrameClient&) = delete;
    FrameClient& operator=(const FrameClient&) = delete;

    // Connects if needed. False when the endpoint is unreachable.
    bool ensure_connected();

    // Sends `body`, waits for the reply frame. False on any I/O failure;
    // the frame is not retried.
    bool call(std::string_view body, std::string& reply);

    const std::string& endpoint() const noexcept { return endpoint_; }

  private:
    void close_locked();

    std::string endpoint_;
    std::mutex mu_;
    int fd_ = -1;
};

// ── Server ──────────────────────────────────────────────────────────────────

// Accepts persistent connections and answers each frame via the handler.
// One thread per connection; handlers run on that thread.
class FrameServer {
  public:
    using Handler = std::function<std::string(std::string_view body)>;

    FrameServer() = default;
    ~FrameServer();

    // Binds and starts the accept loop. port 0 picks an ephemeral port;
    // port() reports the actual one.
    bool start(uint16_t port, Handler handler);
    void stop();

    uint16_t port() const noexcept { return port_; }

  private:
    void accept_loop();
    void serve_connection(int fd);

    Handler handler_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex conns_mu_;
    std::set<int> conn_fds_;
    std::vector<std::thread> conn_threads_;
};

}  // namespace met

#endif  // MET_FRAMING_HPP
