#include "support/rule_gen.hpp"

#include <unordered_map>

namespace met::testing {

namespace {

RuleAstPtr random_rule_at(std::mt19937_64& rng, const RuleGenParams& params,
                          int depth) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (depth <= 0 || coin(rng) >= params.branch_probability) {
        std::uniform_int_distribution<uint32_t> count_dist(1, params.max_count);
        std::uniform_int_distribution<size_t> type_dist(0,
                                                        params.types.size() - 1);
        return RuleAst::leaf(count_dist(rng), params.types[type_dist(rng)]);
    }
    const RuleAst::Kind kind =
        coin(rng) < 0.5 ? RuleAst::Kind::And : RuleAst::Kind::Or;
    return RuleAst::branch(kind, random_rule_at(rng, params, depth - 1),
                           random_rule_at(rng, params, depth - 1));
}

// Splitting evaluator over count vectors, memoized on (node, vector). The
// vector is packed 8 bits per type, so per-type counts must stay below 256
// (the generators here keep them far smaller).
class SplitEval {
  public:
    SplitEval(const RuleAst& root, std::vector<std::string> types)
        : types_(std::move(types)) {
        index_nodes(root);
    }

    bool eval(const RuleAst& node, const std::vector<uint32_t>& counts) {
        const uint64_t key =
            (static_cast<uint64_t>(node_index_.at(&node)) << 40) | pack(counts);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;

        bool result = false;
        if (node.is_leaf()) {
            const size_t t = type_slot(node.event_type);
            result = t < counts.size() && counts[t] >= node.count;
        } else if (node.kind == RuleAst::Kind::Or) {
            result = eval(*node.left, counts) || eval(*node.right, counts);
        } else {
            result = any_split(node, counts);
        }
        memo_.emplace(key, result);
        return result;
    }

    size_t type_slot(const std::string& type) const {
        for (size_t i = 0; i < types_.size(); ++i) {
            if (types_[i] == type) return i;
        }
        return types_.size();
    }

  private:
    void index_nodes(const RuleAst& node) {
        node_index_.emplace(&node, node_index_.size());
        if (!node.is_leaf()) {
            index_nodes(*node.left);
            index_nodes(*node.right);
        }
    }

    static uint64_t pack(const std::vector<uint32_t>& counts) {
        uint64_t packed = 0;
        for (uint32_t c : counts) packed = (packed << 8) | (c & 0xff);
        return packed;
    }

    bool any_split(const RuleAst& node, const std::vector<uint32_t>& counts) {
        // Enumerate every sub-vector given to the left operand; the right
        // operand gets the remainder.
        std::vector<uint32_t> left(counts.size(), 0);
        std::vector<uint32_t> right(counts.size(), 0);
        while (true) {
            for (size_t i = 0; i < counts.size(); ++i) {
                right[i] = counts[i] - left[i];
            }
            if (eval(*node.left, left) && eval(*node.right, right)) return true;
            size_t i = 0;
            for (; i < counts.size(); ++i) {
                if (left[i] < counts[i]) {
                    ++left[i];
                    break;
                }
                left[i] = 0;
            }
            if (i == counts.size()) return false;
        }
    }

    std::vector<std::string> types_;
    std::unordered_map<const RuleAst*, uint32_t> node_index_;
    std::unordered_map<uint64_t, bool> memo_;
};

}  // namespace

RuleAstPtr random_rule(std::mt19937_64& rng, const RuleGenParams& params) {
    return random_rule_at(rng, params, params.max_depth);
}

std::vector<Event> random_stream(std::mt19937_64& rng,
                                 const std::vector<std::string>& types,
                                 size_t n) {
    std::uniform_int_distribution<size_t> type_dist(0, types.size() - 1);
    std::vector<Event> events;
    events.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Event ev;
        ev.id = "e" + std::to_string(i);
        ev.event_type = types[type_dist(rng)];
        ev.created_at_ns = static_cast<int64_t>(i);
        events.push_back(std::move(ev));
    }
    return events;
}

bool splits_satisfy(const RuleAst& ast,
                    const std::map<std::string, uint64_t>& counts) {
    std::vector<std::string> types;
    std::vector<uint32_t> vector_counts;
    for (const auto& [type, count] : counts) {
        types.push_back(type);
        vector_counts.push_back(static_cast<uint32_t>(count));
    }
    SplitEval eval(ast, types);
    return eval.eval(ast, vector_counts);
}

}  // namespace met::testing
