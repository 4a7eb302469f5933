#include "met/ulid.hpp"

#include <chrono>
#include <cstdint>
#include <mutex>
#include <random>

namespace met {

namespace {

constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

struct UlidState {
    std::mutex mu;
    std::mt19937_64 rng{std::random_device{}()};
    uint64_t last_ms = 0;
    uint64_t hi16 = 0;  // top 16 bits of entropy
    uint64_t lo64 = 0;  // bottom 64 bits of entropy
};

UlidState& state() {
    static UlidState s;
    return s;
}

}  // namespace

std::string new_ulid() {
    const uint64_t ms = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());

    UlidState& s = state();
    std::lock_guard<std::mutex> lock(s.mu);
    if (ms == s.last_ms) {
        // Same millisecond: bump the entropy so ids stay ordered.
        if (++s.lo64 == 0) ++s.hi16;
    } else {
        s.last_ms = ms;
        s.hi16 = s.rng() & 0xffff;
        s.lo64 = s.rng();
    }

    // 128 bits total: 48-bit time, 16+64-bit entropy. Encode 5 bits per
    // character, most significant first; the leading character carries only
    // the top 3 bits of the timestamp.
    char out[26];
    uint64_t t = ms & 0xffffffffffffull;
    for (int i = 9; i >= 0; --i) {
        out[i] = kCrockford[t & 0x1f];
        t >>= 5;
    }
    unsigned __int128 entropy =
        (static_cast<unsigned __int128>(s.hi16) << 64) | s.lo64;
    for (int i = 25; i >= 10; --i) {
        out[i] = kCrockford[static_cast<unsigned>(entropy & 0x1f)];
        entropy >>= 5;
    }
    return std::string(out, 26);
}

}  // namespace met
