#ifndef MET_CLOCK_HPP
#define MET_CLOCK_HPP

#include <chrono>
#include <cstdint>

namespace met {

// Wall-clock nanoseconds; timestamps are comparable across processes on one
// host, which is the deployment the harness measures latency in.
inline int64_t now_wall_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Monotonic nanoseconds for durations.
inline int64_t now_steady_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace met

#endif  // MET_CLOCK_HPP
