#ifndef MET_REPLAY_HPP
#define MET_REPLAY_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "met/rule.hpp"
#include "met/trigger.hpp"

namespace met {

// Single-threaded reference evaluator. Replays an ordered event log against
// a rule and returns the exact expected firing sequence (FIFO consumption,
// lowest-case priority, sum-merged conjunctions). Events whose type does not
// appear in the rule are skipped, mirroring dispatcher routing. Kept
// deliberately separate from TriggerHandler: equivalence between the two is
// a test subject, not a code-sharing opportunity.
std::vector<FiringRecord> replay(const NormalizedRule& rule,
                                 const std::vector<Event>& events,
                                 std::string_view trigger_id = "replay");

// Parses the rule first; SyntaxError/CaseExplosionError pass through.
std::vector<FiringRecord> replay(std::string_view rule_text,
                                 const std::vector<Event>& events);

// events / firings, as measured against a baseline that invokes once per
// event. Undefined when nothing fired.
struct InvocationRatio {
    uint64_t events = 0;
    uint64_t firings = 0;

    bool defined() const noexcept { return firings != 0; }
    double value() const { return static_cast<double>(events) / firings; }
};

InvocationRatio invocation_ratio(std::string_view rule_text,
                                 const std::vector<Event>& events);

}  // namespace met

#endif  // MET_REPLAY_HPP
