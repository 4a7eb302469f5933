// ============================================================================
// met/rule.hpp — trigger rule grammar, AST, and case normalization
// ============================================================================
//
// A trigger rule describes when a function fires in terms of event counts:
//
//   <rule>      ::= <count> ":" <type> | <condition> "(" <rule> "," <rule> ")"
//   <condition> ::= "AND" | "OR"
//   <count>     ::= [0-9]+        (1 .. 1,000,000)
//   <type>      ::= [a-zA-Z]+
//
// Whitespace between tokens is accepted and ignored; everything else is a
// SyntaxError with the offending offset. NOT is rejected like any other
// unknown keyword: absence of an event cannot be established.
//
// For evaluation a rule is flattened into disjunctive cases: each case maps
// event types to the count of queued events it needs. AND distributes over
// OR left-to-right; repeated types within one conjunction merge by summing
// their counts (each leaf demands its own events); duplicate cases are
// dropped keeping the earliest. The case list is capped at 1024.
//
// ============================================================================

#ifndef MET_RULE_HPP
#define MET_RULE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace met {

inline constexpr uint32_t kMaxCount = 1'000'000;
inline constexpr size_t kMaxCases = 1024;

// ── Errors ──────────────────────────────────────────────────────────────────

class SyntaxError : public std::runtime_error {
  public:
    SyntaxError(size_t offset, std::string expected);

    size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

  private:
    size_t offset_;
    std::string expected_;
};

class CaseExplosionError : public std::runtime_error {
  public:
    explicit CaseExplosionError(size_t limit);
};

// ── AST ─────────────────────────────────────────────────────────────────────

struct RuleAst;
using RuleAstPtr = std::unique_ptr<RuleAst>;

struct RuleAst {
    enum class Kind : uint8_t { Leaf, And, Or };

    Kind kind = Kind::Leaf;

    // Leaf only.
    uint32_t count = 0;
    std::string event_type;

    // And/Or only.
    RuleAstPtr left;
    RuleAstPtr right;

    bool is_leaf() const noexcept { return kind == Kind::Leaf; }

    static RuleAstPtr leaf(uint32_t count, std::string event_type);
    static RuleAstPtr branch(Kind kind, RuleAstPtr left, RuleAstPtr right);

    RuleAstPtr clone() const;
};

bool ast_equal(const RuleAst& a, const RuleAst& b);

// ── Normalized form ─────────────────────────────────────────────────────────

struct CaseRequirement {
    // event type -> required count, all counts >= 1, never empty. Counts are
    // 64-bit: leaves are capped at kMaxCount but sums within a conjunction
    // are not.
    std::map<std::string, uint64_t> requirements;
    size_t case_index = 0;

    bool same_requirements(const CaseRequirement& other) const {
        return requirements == other.requirements;
    }
};

struct NormalizedRule {
    std::vector<CaseRequirement> cases;  // case_index contiguous from 0
    std::string source_text;

    // Distinct event types across all cases, sorted.
    std::vector<std::string> event_types() const;
};

// ── Operations ──────────────────────────────────────────────────────────────

// Parses exactly the grammar above (plus whitespace); throws SyntaxError.
RuleAstPtr parse_rule(std::string_view text);

// Canonical text, no whitespace; parse_rule(render_rule(a)) == a.
std::string render_rule(const RuleAst& ast);

// Flattens into disjunctive cases; throws CaseExplosionError past kMaxCases.
NormalizedRule normalize_rule(const RuleAst& ast);

// parse + normalize, keeping the original text as source_text.
NormalizedRule compile_rule(std::string_view text);

}  // namespace met

#endif  // MET_RULE_HPP
