#include "met/rule.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace met {

namespace {

std::string describe(size_t offset, const std::string& expected) {
    return "syntax error at offset " + std::to_string(offset) + ": expected " +
           expected;
}

bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Recursive-descent parser over the rule grammar. Tracks byte offsets so
// errors point at the offending token.
class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    RuleAstPtr parse() {
        RuleAstPtr ast = rule();
        skip_ws();
        if (pos_ != text_.size()) {
            throw SyntaxError(pos_, "end of input");
        }
        return ast;
    }

  private:
    RuleAstPtr rule() {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw SyntaxError(pos_, "count or AND/OR");
        }
        const char c = text_[pos_];
        if (is_digit(c)) return leaf();
        if (is_alpha(c)) return branch();
        throw SyntaxError(pos_, "count or AND/OR");
    }

    RuleAstPtr leaf() {
        const size_t count_at = pos_;
        uint64_t value = 0;
        size_t digits = 0;
        while (pos_ < text_.size() && is_digit(text_[pos_])) {
            value = value * 10 + static_cast<uint64_t>(text_[pos_] - '0');
            if (value > kMaxCount) {
                throw SyntaxError(count_at,
                                  "count of at most " + std::to_string(kMaxCount));
            }
            ++pos_;
            ++digits;
        }
        if (digits == 0) throw SyntaxError(pos_, "count");
        if (value == 0) throw SyntaxError(count_at, "count of at least 1");
        expect(':');
        skip_ws();
        const size_t type_at = pos_;
        std::string type;
        while (pos_ < text_.size() && is_alpha(text_[pos_])) {
            type.push_back(text_[pos_]);
            ++pos_;
        }
        if (type.empty()) throw SyntaxError(type_at, "event type ([a-zA-Z]+)");
        return RuleAst::leaf(static_cast<uint32_t>(value), std::move(type));
    }

    RuleAstPtr branch() {
        const size_t keyword_at = pos_;
        std::string keyword;
        while (pos_ < text_.size() && is_alpha(text_[pos_])) {
            keyword.push_back(text_[pos_]);
            ++pos_;
        }
        RuleAst::Kind kind;
        if (keyword == "AND") {
            kind = RuleAst::Kind::And;
        } else if (keyword == "OR") {
            kind = RuleAst::Kind::Or;
        } else {
            pos_ = keyword_at;
            throw SyntaxError(keyword_at, "count or AND/OR");
        }
        expect('(');
        RuleAstPtr left = rule();
        expect(',');
        RuleAstPtr right = rule();
        expect(')');
        return RuleAst::branch(kind, std::move(left), std::move(right));
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != c) {
            throw SyntaxError(pos_, std::string("'") + c + "'");
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    std::string_view text_;
    size_t pos_ = 0;
};

void render_into(const RuleAst& ast, std::string& out) {
    if (ast.is_leaf()) {
        out += std::to_string(ast.count);
        out += ':';
        out += ast.event_type;
        return;
    }
    out += ast.kind == RuleAst::Kind::And ? "AND(" : "OR(";
    render_into(*ast.left, out);
    out += ',';
    render_into(*ast.right, out);
    out += ')';
}

using Requirements = std::map<std::string, uint64_t>;

// Deduplicating case list; keeps first-occurrence order and enforces the cap.
class CaseList {
  public:
    void add(Requirements reqs) {
        if (!seen_.insert(reqs).second) return;
        if (items_.size() >= kMaxCases) throw CaseExplosionError(kMaxCases);
        items_.push_back(std::move(reqs));
    }

    std::vector<Requirements> take() { return std::move(items_); }

  private:
    std::vector<Requirements> items_;
    std::set<Requirements> seen_;
};

// Distributes AND over OR: left operand's cases enumerate first, and within
// a conjunction repeated event types sum their counts.
std::vector<Requirements> cases_of(const RuleAst& ast) {
    if (ast.is_leaf()) {
        return {Requirements{{ast.event_type, ast.count}}};
    }
    std::vector<Requirements> left = cases_of(*ast.left);
    std::vector<Requirements> right = cases_of(*ast.right);
    CaseList out;
    if (ast.kind == RuleAst::Kind::Or) {
        for (auto& c : left) out.add(std::move(c));
        for (auto& c : right) out.add(std::move(c));
    } else {
        for (const auto& a : left) {
            for (const auto& b : right) {
                Requirements merged = a;
                for (const auto& [type, count] : b) merged[type] += count;
                out.add(std::move(merged));
            }
        }
    }
    return out.take();
}

}  // namespace

SyntaxError::SyntaxError(size_t offset, std::string expected)
    : std::runtime_error(describe(offset, expected)),
      offset_(offset),
      expected_(std::move(expected)) {}

CaseExplosionError::CaseExplosionError(size_t limit)
    : std::runtime_error("rule expands to more than " + std::to_string(limit) +
                         " cases") {}

RuleAstPtr RuleAst::leaf(uint32_t count, std::string event_type) {
    auto node = std::make_unique<RuleAst>();
    node->kind = Kind::Leaf;
    node->count = count;
    node->event_type = std::move(event_type);
    return node;
}

RuleAstPtr RuleAst::branch(Kind kind, RuleAstPtr left, RuleAstPtr right) {
    auto node = std::make_unique<RuleAst>();
    node->kind = kind;
    node->left = std::move(left);
    node->right = std::move(right);
    return node;
}

RuleAstPtr RuleAst::clone() const {
    if (is_leaf()) return leaf(count, event_type);
    return branch(kind, left->clone(), right->clone());
}

bool ast_equal(const RuleAst& a, const RuleAst& b) {
    if (a.kind != b.kind) return false;
    if (a.is_leaf()) return a.count == b.count && a.event_type == b.event_type;
    return ast_equal(*a.left, *b.left) && ast_equal(*a.right, *b.right);
}

std::vector<std::string> NormalizedRule::event_types() const {
    std::set<std::string> types;
    for (const auto& c : cases) {
        for (const auto& [type, count] : c.requirements) types.insert(type);
    }
    return {types.begin(), types.end()};
}

RuleAstPtr parse_rule(std::string_view text) { return Parser(text).parse(); }

std::string render_rule(const RuleAst& ast) {
    std::string out;
    render_into(ast, out);
    return out;
}

NormalizedRule normalize_rule(const RuleAst& ast) {
    NormalizedRule rule;
    rule.source_text = render_rule(ast);
    std::vector<Requirements> cases = cases_of(ast);
    rule.cases.reserve(cases.size());
    for (size_t i = 0; i < cases.size(); ++i) {
        rule.cases.push_back(CaseRequirement{std::move(cases[i]), i});
    }
    return rule;
}

NormalizedRule compile_rule(std::string_view text) {
    NormalizedRule rule = normalize_rule(*parse_rule(text));
    rule.source_text = std::string(text);
    return rule;
}

}  // namespace met
