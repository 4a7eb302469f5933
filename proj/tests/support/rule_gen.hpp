#ifndef MET_TESTS_SUPPORT_RULE_GEN_HPP
#define MET_TESTS_SUPPORT_RULE_GEN_HPP

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "met/event.hpp"
#include "met/rule.hpp"

namespace met::testing {

struct RuleGenParams {
    int max_depth = 4;         // leaf-only at depth 0
    uint32_t max_count = 6;
    std::vector<std::string> types = {"a", "b", "c", "d"};
    double branch_probability = 0.7;  // at depth > 0
};

RuleAstPtr random_rule(std::mt19937_64& rng, const RuleGenParams& params);

// Uniform random event stream over `types`; ids are "e<i>", createdAt = i.
std::vector<Event> random_stream(std::mt19937_64& rng,
                                 const std::vector<std::string>& types,
                                 size_t n);

// Resource-splitting semantics: whether the available counts can be
// partitioned among the tree's leaves so the whole rule evaluates true.
// AND splits the counts between its operands; OR shares them. This is the
// independent ground truth that case normalization is checked against.
bool splits_satisfy(const RuleAst& ast,
                    const std::map<std::string, uint64_t>& counts);

}  // namespace met::testing

#endif  // MET_TESTS_SUPPORT_RULE_GEN_HPP
