#include "met/framing.hpp"

#include <gtest/gtest.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <string>

namespace met {
namespace {

TEST(Framing, PrefixBytesAreBigEndian) {
    const std::string framed = encode_frame("{}");
    ASSERT_EQ(framed.size(), 6u);
    EXPECT_EQ(framed[0], '\x00');
    EXPECT_EQ(framed[1], '\x00');
    EXPECT_EQ(framed[2], '\x00');
    EXPECT_EQ(framed[3], '\x02');
    EXPECT_EQ(framed.substr(4), "{}");

    const std::string big = encode_frame(std::string(0x0102, 'x'));
    EXPECT_EQ(big[2], '\x01');
    EXPECT_EQ(big[3], '\x02');
}

TEST(Framing, ParseEndpoint) {
    auto ep = parse_endpoint("127.0.0.1:9091");
    ASSERT_TRUE(ep.has_value());
    EXPECT_EQ(ep->first, "127.0.0.1");
    EXPECT_EQ(ep->second, 9091);
    EXPECT_FALSE(parse_endpoint("127.0.0.1").has_value());
    EXPECT_FALSE(parse_endpoint(":9091").has_value());
    EXPECT_FALSE(parse_endpoint("host:").has_value());
    EXPECT_FALSE(parse_endpoint("host:0").has_value());
    EXPECT_FALSE(parse_endpoint("host:70000").has_value());
    EXPECT_FALSE(parse_endpoint("host:12x").has_value());
}

TEST(Framing, ReadFrameOverSocketPair) {
    int fds[2];
    ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
    ASSERT_TRUE(write_frame(fds[0], "hello"));
    std::string body;
    ASSERT_EQ(read_frame(fds[1], body), FrameIoResult::kOk);
    EXPECT_EQ(body, "hello");

    // A closed peer reads as kClosed on the frame boundary.
    ::close(fds[0]);
    EXPECT_EQ(read_frame(fds[1], body), FrameIoResult::kClosed);
    ::close(fds[1]);
}

TEST(Framing, OversizedFrameIsRejected) {
    int fds[2];
    ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
    const uint32_t huge = kMaxFrameBytes + 1;
    const char prefix[4] = {static_cast<char>(huge >> 24),
                            static_cast<char>((huge >> 16) & 0xff),
                            static_cast<char>((huge >> 8) & 0xff),
                            static_cast<char>(huge & 0xff)};
    ASSERT_EQ(::send(fds[0], prefix, 4, 0), 4);
    std::string body;
    EXPECT_EQ(read_frame(fds[1], body), FrameIoResult::kTooBig);
    ::close(fds[0]);
    ::close(fds[1]);
}

TEST(Framing, ClientServerRoundTrip) {
    FrameServer server;
    ASSERT_TRUE(server.start(0, [](std::string_view body) {
        std::string reply(body);
        std::transform(reply.begin(), reply.end(), reply.begin(), ::toupper);
        return reply;
    }));
    FrameClient client("127.0.0.1:" + std::to_string(server.port()));
    std::string reply;
    ASSERT_TRUE(client.call("ping", reply));
    EXPECT_EQ(reply, "PING");
    ASSERT_TRUE(client.call("again", reply));
    EXPECT_EQ(reply, "AGAIN");
    server.stop();
}

TEST(Framing, LargeFrameRoundTrip) {
    FrameServer server;
    ASSERT_TRUE(server.start(0, [](std::string_view body) {
        return std::to_string(body.size());
    }));
    FrameClient client("127.0.0.1:" + std::to_string(server.port()));
    std::string reply;
    const std::string big(1 << 20, 'q');
    ASSERT_TRUE(client.call(big, reply));
    EXPECT_EQ(reply, std::to_string(big.size()));
    server.stop();
}

TEST(Framing, TwoClientsInterleave) {
    FrameServer server;
    ASSERT_TRUE(server.start(0, [](std::string_view body) {
        return std::string(body) + "!";
    }));
    const std::string endpoint = "127.0.0.1:" + std::to_string(server.port());
    FrameClient a(endpoint), b(endpoint);
    std::string reply;
    ASSERT_TRUE(a.call("a1", reply));
    EXPECT_EQ(reply, "a1!");
    ASSERT_TRUE(b.call("b1", reply));
    EXPECT_EQ(reply, "b1!");
    ASSERT_TRUE(a.call("a2", reply));
    EXPECT_EQ(reply, "a2!");
    server.stop();
}

TEST(Framing, CallFailsAfterServerStops) {
    auto server = std::make_unique<FrameServer>();
    ASSERT_TRUE(server->start(0, [](std::string_view) { return "ok"; }));
    const std::string endpoint = "127.0.0.1:" + std::to_string(server->port());
    FrameClient client(endpoint);
    std::string reply;
    ASSERT_TRUE(client.call("x", reply));
    server->stop();
    server.reset();
    EXPECT_FALSE(client.call("y", reply));
}

TEST(Framing, ConnectToUnreachableEndpointFails) {
    FrameClient client("127.0.0.1:1");  // nothing listens there
    std::string reply;
    EXPECT_FALSE(client.call("x", reply));
    EXPECT_FALSE(client.ensure_connected());
}

}  // namespace
}  // namespace met
