#include "met/rule.hpp"

#include <gtest/gtest.h>

#include <random>

#include "support/rule_gen.hpp"

namespace met {
namespace {

using testing::RuleGenParams;
using testing::random_rule;
using testing::splits_satisfy;

constexpr char kSmartHomeRule[] =
    "OR(AND(6:temperature,6:wind),AND(1:temperature,1:motion))";
constexpr char kIncidentRule[] =
    "OR(AND(5:packetLoss,1:temperature),1:powerConsumption)";

TEST(RuleParse, SmartHomeRuleShape) {
    RuleAstPtr ast = parse_rule(kSmartHomeRule);
    ASSERT_EQ(ast->kind, RuleAst::Kind::Or);
    ASSERT_EQ(ast->left->kind, RuleAst::Kind::And);
    EXPECT_EQ(ast->left->left->count, 6u);
    EXPECT_EQ(ast->left->left->event_type, "temperature");
    EXPECT_EQ(ast->left->right->count, 6u);
    EXPECT_EQ(ast->left->right->event_type, "wind");
    ASSERT_EQ(ast->right->kind, RuleAst::Kind::And);
    EXPECT_EQ(ast->right->left->count, 1u);
    EXPECT_EQ(ast->right->left->event_type, "temperature");
    EXPECT_EQ(ast->right->right->count, 1u);
    EXPECT_EQ(ast->right->right->event_type, "motion");
}

TEST(RuleParse, WhitespaceBetweenTokensIsIgnored) {
    const char* pretty =
        "OR(\n"
        "    AND(6:temperature,6:wind),\n"
        "    AND(1:temperature,1:motion)\n"
        ")";
    EXPECT_TRUE(ast_equal(*parse_rule(pretty), *parse_rule(kSmartHomeRule)));
    EXPECT_TRUE(ast_equal(*parse_rule(" 3 : a "), *parse_rule("3:a")));
}

TEST(RuleParse, BareLeaf) {
    RuleAstPtr ast = parse_rule("3:a");
    ASSERT_TRUE(ast->is_leaf());
    EXPECT_EQ(ast->count, 3u);
    EXPECT_EQ(ast->event_type, "a");
}

TEST(RuleParse, LeadingZerosAreBase10) {
    EXPECT_EQ(parse_rule("007:a")->count, 7u);
}

TEST(RuleParse, TypeMayLookLikeKeyword) {
    RuleAstPtr ast = parse_rule("1:AND");
    ASSERT_TRUE(ast->is_leaf());
    EXPECT_EQ(ast->event_type, "AND");
}

TEST(RuleParse, RejectsNotAtOffsetZero) {
    try {
        parse_rule("NOT(1:a)");
        FAIL() << "NOT must not parse";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 0u);
        EXPECT_EQ(e.expected(), "count or AND/OR");
    }
}

TEST(RuleParse, RejectsZeroCount) {
    try {
        parse_rule("0:a");
        FAIL() << "zero count must not parse";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    EXPECT_THROW(parse_rule("AND(0:a,1:b)"), SyntaxError);
}

TEST(RuleParse, RejectsEnclosingParens) {
    // Rules never start with '('; "(3:a)" stays an error.
    try {
        parse_rule("(3:a)");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(RuleParse, CountUpperBound) {
    EXPECT_EQ(parse_rule("1000000:a")->count, 1000000u);
    EXPECT_THROW(parse_rule("1000001:a"), SyntaxError);
    EXPECT_THROW(parse_rule("99999999999999999999:a"), SyntaxError);
}

TEST(RuleParse, RejectionCorpus) {
    const char* bad[] = {
        "",           " ",          ":a",          "3:",
        "3a",         "3::a",       "3:a1b",       "1.5:a",
        "-1:a",       "and(1:a,1:b)", "XOR(1:a,1:b)", "NOT (1:a)",
        "AND(1:a)",   "AND(1:a,)",  "OR(,1:a)",    "AND(1:a,1:b",
        "AND(1:a 1:b)", "AND(1:a,1:b))", "AND((1:a),(1:b))",
        "AND(1:a,1:b,1:c)", "OR(NOT(1:a),1:b)", "3:a extra",
        "6:temperature,",
    };
    for (const char* text : bad) {
        EXPECT_THROW(parse_rule(text), SyntaxError) << "accepted: " << text;
    }
}

TEST(RuleParse, ErrorsCarryPositions) {
    try {
        parse_rule("AND(1:a,XOR(1:b,1:c))");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 8u);
    }
    try {
        parse_rule("AND(1:a 1:b)");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 8u);
        EXPECT_EQ(e.expected(), "','");
    }
}

TEST(RuleRender, LeafAndPairAreCanonical) {
    EXPECT_EQ(render_rule(*RuleAst::leaf(3, "a")), "3:a");
    EXPECT_EQ(render_rule(*RuleAst::branch(RuleAst::Kind::And,
                                           RuleAst::leaf(2, "a"),
                                           RuleAst::leaf(2, "b"))),
              "AND(2:a,2:b)");
    EXPECT_EQ(render_rule(*parse_rule(" OR( 1:a , 2:b ) ")), "OR(1:a,2:b)");
}

TEST(RuleRender, RoundTripsThousandRandomAsts) {
    std::mt19937_64 rng(20240811);
    RuleGenParams params;
    for (int i = 0; i < 1000; ++i) {
        RuleAstPtr ast = random_rule(rng, params);
        RuleAstPtr reparsed = parse_rule(render_rule(*ast));
        ASSERT_TRUE(ast_equal(*ast, *reparsed)) << render_rule(*ast);
    }
}

TEST(RuleNormalize, IncidentRuleCases) {
    const NormalizedRule rule = compile_rule(kIncidentRule);
    ASSERT_EQ(rule.cases.size(), 2u);
    const auto& case0 = rule.cases[0].requirements;
    EXPECT_EQ(case0.size(), 2u);
    EXPECT_EQ(case0.at("packetLoss"), 5u);
    EXPECT_EQ(case0.at("temperature"), 1u);
    const auto& case1 = rule.cases[1].requirements;
    EXPECT_EQ(case1.size(), 1u);
    EXPECT_EQ(case1.at("powerConsumption"), 1u);
    EXPECT_EQ(rule.cases[0].case_index, 0u);
    EXPECT_EQ(rule.cases[1].case_index, 1u);
}

TEST(RuleNormalize, SingleLeaf) {
    const NormalizedRule rule = compile_rule("1:a");
    ASSERT_EQ(rule.cases.size(), 1u);
    EXPECT_EQ(rule.cases[0].requirements.at("a"), 1u);
}

TEST(RuleNormalize, DistributesAndOverOrLeftFirst) {
    const NormalizedRule rule = compile_rule("AND(OR(1:a,1:b),OR(1:c,1:d))");
    ASSERT_EQ(rule.cases.size(), 4u);
    using Reqs = std::map<std::string, uint64_t>;
    EXPECT_EQ(rule.cases[0].requirements, (Reqs{{"a", 1}, {"c", 1}}));
    EXPECT_EQ(rule.cases[1].requirements, (Reqs{{"a", 1}, {"d", 1}}));
    EXPECT_EQ(rule.cases[2].requirements, (Reqs{{"b", 1}, {"c", 1}}));
    EXPECT_EQ(rule.cases[3].requirements, (Reqs{{"b", 1}, {"d", 1}}));
}

TEST(RuleNormalize, RepeatedTypesInConjunctionSumCounts) {
    const NormalizedRule rule = compile_rule("AND(2:a,3:a)");
    ASSERT_EQ(rule.cases.size(), 1u);
    EXPECT_EQ(rule.cases[0].requirements.at("a"), 5u);
}

TEST(RuleNormalize, DeduplicatesKeepingEarliest) {
    const NormalizedRule rule = compile_rule("OR(1:a,OR(1:b,1:a))");
    ASSERT_EQ(rule.cases.size(), 2u);
    EXPECT_EQ(rule.cases[0].requirements.begin()->first, "a");
    EXPECT_EQ(rule.cases[1].requirements.begin()->first, "b");
}

std::string or_pair(char prefix) {
    const std::string p(1, prefix);
    return "OR(1:" + p + "x,1:" + p + "y)";
}

std::string and_chain_of_or_pairs(int pairs) {
    std::string text = or_pair('a');
    for (int i = 1; i < pairs; ++i) {
        text = "AND(" + or_pair(static_cast<char>('a' + i)) + "," + text + ")";
    }
    return text;
}

TEST(RuleNormalize, CaseCapIsEnforced) {
    // 10 independent OR pairs -> exactly 1024 distinct cases: allowed.
    const NormalizedRule at_cap = compile_rule(and_chain_of_or_pairs(10));
    EXPECT_EQ(at_cap.cases.size(), 1024u);
    // 11 pairs -> 2048: rejected.
    EXPECT_THROW(compile_rule(and_chain_of_or_pairs(11)), CaseExplosionError);
}

TEST(RuleNormalize, DeterministicOrdering) {
    const NormalizedRule a = compile_rule(kSmartHomeRule);
    const NormalizedRule b = compile_rule(kSmartHomeRule);
    ASSERT_EQ(a.cases.size(), b.cases.size());
    for (size_t i = 0; i < a.cases.size(); ++i) {
        EXPECT_EQ(a.cases[i].requirements, b.cases[i].requirements);
    }
}

// A multiset of available events satisfies some normalized case exactly when
// the events can be split among the rule's leaves (the resource semantics of
// a conjunction). Checked against the brute-force splitting evaluator.
TEST(RuleNormalize, AgreesWithSplittingSemantics) {
    std::mt19937_64 rng(7041);
    RuleGenParams params;
    params.max_depth = 4;
    params.max_count = 6;
    params.types = {"a", "b", "c", "d"};
    std::uniform_int_distribution<uint64_t> count_dist(0, 12);
    for (int i = 0; i < 120; ++i) {
        RuleAstPtr ast = random_rule(rng, params);
        const NormalizedRule rule = normalize_rule(*ast);
        for (int j = 0; j < 40; ++j) {
            std::map<std::string, uint64_t> counts;
            for (const std::string& type : params.types) {
                counts[type] = count_dist(rng);
            }
            bool any_case = false;
            for (const CaseRequirement& c : rule.cases) {
                bool ok = true;
                for (const auto& [type, required] : c.requirements) {
                    if (counts[type] < required) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    any_case = true;
                    break;
                }
            }
            EXPECT_EQ(any_case, splits_satisfy(*ast, counts))
                << render_rule(*ast);
        }
    }
}

TEST(RuleNormalize, EventTypesSortedDistinct) {
    const NormalizedRule rule = compile_rule(kIncidentRule);
    EXPECT_EQ(rule.event_types(),
              (std::vector<std::string>{"packetLoss", "powerConsumption",
                                        "temperature"}));
}

}  // namespace
}  // namespace met
