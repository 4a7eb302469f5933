#ifndef MET_TESTS_SUPPORT_RESCAN_REPLAY_HPP
#define MET_TESTS_SUPPORT_RESCAN_REPLAY_HPP

#include <vector>

#include "met/replay.hpp"

namespace met::testing {

// Second, deliberately naive reference evaluator: keeps one flat append-only
// log with consumed flags and rescans it for every case on every arrival.
// Shares no queue bookkeeping with met::replay or TriggerHandler.
std::vector<FiringRecord> rescan_replay(const NormalizedRule& rule,
                                        const std::vector<Event>& events);

}  // namespace met::testing

#endif  // MET_TESTS_SUPPORT_RESCAN_REPLAY_HPP
