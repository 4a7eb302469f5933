#include "met/framing.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace met {

namespace {

bool send_all(int fd, const char* data, size_t len) {
    size_t sent = 0;
    while (sent < len) {
        ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        sent += static_cast<size_t>(n);
    }
    return true;
}

FrameIoResult recv_all(int fd, char* data, size_t len) {
    size_t got = 0;
    while (got < len) {
        ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n == 0) return got == 0 ? FrameIoResult::kClosed : FrameIoResult::kError;
        if (n < 0) {
            if (errno == EINTR) continue;
            return FrameIoResult::kError;
        }
        got += static_cast<size_t>(n);
    }
    return FrameIoResult::kOk;
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

int connect_to(const std::string& host, uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0) {
        return -1;
    }
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd >= 0) set_nodelay(fd);
    return fd;
}

}  // namespace

std::string encode_frame(std::string_view body) {
    std::string out;
    out.reserve(4 + body.size());
    const uint32_t len = static_cast<uint32_t>(body.size());
    out.push_back(static_cast<char>((len >> 24) & 0xff));
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out.append(body);
    return out;
}

std::optional<std::pair<std::string, uint16_t>> parse_endpoint(
    std::string_view endpoint) {
    const size_t colon = endpoint.rfind(':');
    if (colon == std::string_view::npos || colon == 0 ||
        colon + 1 >= endpoint.size()) {
        return std::nullopt;
    }
    uint32_t port = 0;
    const char* first = endpoint.data() + colon + 1;
    const char* last = endpoint.data() + endpoint.size();
    auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc() || ptr != last || port == 0 || port > 65535) {
        return std::nullopt;
    }
    return std::make_pair(std::string(endpoint.substr(0, colon)),
                          static_cast<uint16_t>(port));
}

FrameIoResult read_frame(int fd, std::string& body) {
    char prefix[4];
    FrameIoResult r = recv_all(fd, prefix, 4);
    if (r != FrameIoResult::kOk) return r;
    const uint32_t len = (static_cast<uint32_t>(static_cast<unsigned char>(prefix[0])) << 24) |
                         (static_cast<uint32_t>(static_cast<unsigned char>(prefix[1])) << 16) |
                         (static_cast<uint32_t>(static_cast<unsigned char>(prefix[2])) << 8) |
                         static_cast<uint32_t>(static_cast<unsigned char>(prefix[3]));
    if (len > kMaxFrameBytes) return FrameIoResult::kTooBig;
    body.resize(len);
    if (len == 0) return FrameIoResult::kOk;
    r = recv_all(fd, body.data(), len);
    return r == FrameIoResult::kClosed ? FrameIoResult::kError : r;
}

bool write_frame(int fd, std::string_view body) {
    const std::string framed = encode_frame(body);
    return send_all(fd, framed.data(), framed.size());
}

FrameClient::FrameClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

FrameClient::~FrameClient() {
    std::lock_guard<std::mutex> lock(mu_);
    close_locked();
}

void FrameClient::close_locked() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

bool FrameClient::ensure_connected() {
    std::lock_guard<std::mutex> lock(mu_);
    if (fd_ >= 0) return true;
    auto parsed = parse_endpoint(endpoint_);
    if (!parsed) return false;
    fd_ = connect_to(parsed->first, parsed->second);
    return fd_ >= 0;
}

bool FrameClient::call(std::string_view body, std::string& reply) {
    std::lock_guard<std::mutex> lock(mu_);
    if (fd_ < 0) {
        auto parsed = parse_endpoint(endpoint_);
        if (!parsed) return false;
        fd_ = connect_to(parsed->first, parsed->second);
        if (fd_ < 0) return false;
    }
    if (!write_frame(fd_, body)) {
        close_locked();
        return false;
    }
    if (read_frame(fd_, reply) != FrameIoResult::kOk) {
        close_locked();
        return false;
    }
    return true;
}

FrameServer::~FrameServer() { stop(); }

bool FrameServer::start(uint16_t port, Handler handler) {
    handler_ = std::move(handler);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) return false;
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 128) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        return false;
    }
    socklen_t addr_len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &addr_len);
    port_ = ntohs(addr.sin_port);
    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return true;
}

void FrameServer::stop() {
    if (listen_fd_ < 0 && !accept_thread_.joinable()) return;
    stopping_ = true;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        std::lock_guard<std::mutex> lock(conns_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(conns_mu_);
        threads.swap(conn_threads_);
    }
    for (std::thread& t : threads) {
        if (t.joinable()) t.join();
    }
}

void FrameServer::accept_loop() {
    while (!stopping_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;  // listener closed
        }
        set_nodelay(fd);
        std::lock_guard<std::mutex> lock(conns_mu_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        conn_fds_.insert(fd);
        conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void FrameServer::serve_connection(int fd) {
    std::string body;
    while (!stopping_) {
        const FrameIoResult r = read_frame(fd, body);
        if (r != FrameIoResult::kOk) break;
        const std::string reply = handler_(body);
        if (!write_frame(fd, reply)) break;
    }
    // Drop from the shutdown set before closing so stop() never touches a
    // recycled descriptor.
    {
        std::lock_guard<std::mutex> lock(conns_mu_);
        conn_fds_.erase(fd);
    }
    ::close(fd);
}

}  // namespace met
