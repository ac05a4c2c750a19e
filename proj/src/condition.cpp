#include "btweave/condition.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "btweave/errors.hpp"
#include "btweave/world_state.hpp"

namespace btweave {

std::string to_string(CompareOp op) {
    switch (op) {
        case CompareOp::Eq: return "==";
        case CompareOp::Ne: return "!=";
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
    }
    return "?";
}

std::string Condition::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < literals_.size(); ++i) {
        if (i > 0) out += " AND ";
        const Literal& l = literals_[i];
        out += l.variable + " " + btweave::to_string(l.op) + " " + l.constant.to_string();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Scanner {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    [[noreturn]] void fail(const std::string& expected) const {
        throw ConditionParseError(pos + 1, expected);  // 1-based position
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        if (eof() || !(std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_'))
            fail("identifier");
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
            ++pos;
        return std::string(text.substr(start, pos - start));
    }

    CompareOp op() {
        skip_ws();
        if (eof()) fail("comparison operator");
        char c = peek();
        if (c == '=') {
            if (pos + 1 < text.size() && text[pos + 1] == '=') {
                pos += 2;
                return CompareOp::Eq;
            }
            fail("'=='");
        }
        if (c == '!') {
            if (pos + 1 < text.size() && text[pos + 1] == '=') {
                pos += 2;
                return CompareOp::Ne;
            }
            fail("'!='");
        }
        if (c == '<') {
            ++pos;
            if (!eof() && peek() == '=') {
                ++pos;
                return CompareOp::Le;
            }
            return CompareOp::Lt;
        }
        if (c == '>') {
            ++pos;
            if (!eof() && peek() == '=') {
                ++pos;
                return CompareOp::Ge;
            }
            return CompareOp::Gt;
        }
        fail("comparison operator");
    }

    Value value() {
        skip_ws();
        if (eof()) fail("value");
        char c = peek();
        if (c == '"') return string_value();
        if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c)))
            return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string word = ident();
            if (word == "true") return Value::boolean(true);
            if (word == "false") return Value::boolean(false);
            return Value::symbol(word);
        }
        fail("value");
    }

    Value string_value() {
        ++pos;  // opening quote
        std::string out;
        while (true) {
            if (eof()) fail("closing '\"'");
            char c = text[pos++];
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("escape character");
                char e = text[pos++];
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: throw ConditionParseError(pos, "valid escape");
                }
            } else {
                out += c;
            }
        }
        return Value::string(std::move(out));
    }

    Value number() {
        std::size_t start = pos;
        if (peek() == '-' || peek() == '+') ++pos;
        bool is_real = false;
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
        if (pos == start || (pos == start + 1 && !std::isdigit(static_cast<unsigned char>(text[start]))))
            fail("number");
        if (!eof() && peek() == '.') {
            is_real = true;
            ++pos;
            while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
        }
        if (!eof() && (peek() == 'e' || peek() == 'E')) {
            is_real = true;
            ++pos;
            if (!eof() && (peek() == '-' || peek() == '+')) ++pos;
            if (eof() || !std::isdigit(static_cast<unsigned char>(peek()))) fail("exponent");
            while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
        }
        std::string tok(text.substr(start, pos - start));
        if (is_real) return Value::real(std::strtod(tok.c_str(), nullptr));
        std::int64_t v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{}) throw ConditionParseError(start + 1, "integer in range");
        return Value::integer(v);
    }
};

}  // namespace

Condition parse_condition(std::string_view text) {
    Scanner s{text};
    std::vector<Literal> lits;
    while (true) {
        Literal l;
        l.variable = s.ident();
        l.op = s.op();
        l.constant = s.value();
        lits.push_back(std::move(l));
        s.skip_ws();
        if (s.eof()) break;
        std::string kw = s.ident();
        if (kw != "AND")
            throw ConditionParseError(s.pos - kw.size() + 1, "'AND' or end of input");
    }
    return Condition(std::move(lits));
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

enum class DomainKind { Numeric, Textual, Boolean };

DomainKind domain_of(ValueType t) {
    switch (t) {
        case ValueType::Bool: return DomainKind::Boolean;
        case ValueType::Int:
        case ValueType::Real: return DomainKind::Numeric;
        case ValueType::String:
        case ValueType::Enum: return DomainKind::Textual;
    }
    return DomainKind::Textual;
}

bool is_ordering(CompareOp op) {
    return op == CompareOp::Lt || op == CompareOp::Le || op == CompareOp::Gt ||
           op == CompareOp::Ge;
}

bool eval_literal(const Literal& l, const Value& var) {
    DomainKind vd = domain_of(var.type());
    DomainKind cd = domain_of(l.constant.type());
    if (vd != cd)
        throw TypeMismatchError(l.variable, to_string(var.type()), to_string(l.constant.type()));
    if (is_ordering(l.op) && vd != DomainKind::Numeric)
        throw TypeMismatchError(l.variable, "numeric", to_string(var.type()));

    switch (vd) {
        case DomainKind::Boolean: {
            bool eq = var.as_bool() == l.constant.as_bool();
            return l.op == CompareOp::Eq ? eq : !eq;
        }
        case DomainKind::Textual: {
            bool eq = var.as_text() == l.constant.as_text();
            return l.op == CompareOp::Eq ? eq : !eq;
        }
        case DomainKind::Numeric: {
            // Unit-tagged reals only compare against the same unit or a
            // unitless constant.
            const std::string& vu = var.unit();
            const std::string& cu = l.constant.unit();
            if (!vu.empty() && !cu.empty() && vu != cu)
                throw TypeMismatchError(l.variable, "real [" + vu + "]", "real [" + cu + "]");
            if (var.type() == ValueType::Int && l.constant.type() == ValueType::Int) {
                std::int64_t a = var.as_int(), b = l.constant.as_int();
                switch (l.op) {
                    case CompareOp::Eq: return a == b;
                    case CompareOp::Ne: return a != b;
                    case CompareOp::Lt: return a < b;
                    case CompareOp::Le: return a <= b;
                    case CompareOp::Gt: return a > b;
                    case CompareOp::Ge: return a >= b;
                }
            }
            double a = var.as_real(), b = l.constant.as_real();
            switch (l.op) {
                case CompareOp::Eq: return std::fabs(a - b) <= kRealEqEps;
                case CompareOp::Ne: return std::fabs(a - b) > kRealEqEps;
                case CompareOp::Lt: return a < b;
                case CompareOp::Le: return a <= b;
                case CompareOp::Gt: return a > b;
                case CompareOp::Ge: return a >= b;
            }
        }
    }
    return false;
}

}  // namespace

bool eval_condition(const Condition& c, const WorldState& w) {
    bool result = true;
    for (const Literal& l : c.literals()) {
        const Value& var = w.get(l.variable);  // throws UnknownVariableError
        // Evaluate every literal so type errors surface even after a false
        // conjunct; evaluation stays total over the whole condition.
        if (!eval_literal(l, var)) result = false;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Subsumption (implies) and satisfiability
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-variable constraint set for one conjunctive condition, interpreted over
// a dense ordered domain (numerics over the reals, text lexicographically).
struct VarConstraint {
    std::optional<DomainKind> domain;

    // Numeric: interval with open/closed bounds plus excluded points.
    double lo = -kInf;
    bool lo_open = false;
    double hi = kInf;
    bool hi_open = false;
    std::set<double> excluded;

    // Textual / boolean as an equality domain.
    std::optional<std::string> pinned_text;
    std::set<std::string> excluded_text;
    std::optional<bool> pinned_bool;
    bool contradictory = false;

    void require_domain(const std::string& var, DomainKind d) {
        if (!domain) {
            domain = d;
        } else if (*domain != d) {
            throw TypeMismatchError(var, domain_name(*domain), domain_name(d));
        }
    }

    static std::string domain_name(DomainKind d) {
        switch (d) {
            case DomainKind::Numeric: return "numeric";
            case DomainKind::Textual: return "textual";
            case DomainKind::Boolean: return "bool";
        }
        return "?";
    }

    void add(const Literal& l) {
        DomainKind d = domain_of(l.constant.type());
        if (is_ordering(l.op) && d != DomainKind::Numeric)
            throw TypeMismatchError(l.variable, "numeric", to_string(l.constant.type()));
        require_domain(l.variable, d);
        switch (d) {
            case DomainKind::Numeric: add_numeric(l); break;
            case DomainKind::Boolean: add_bool(l); break;
            case DomainKind::Textual: add_text(l); break;
        }
    }

    void add_numeric(const Literal& l) {
        double c = l.constant.as_real();
        switch (l.op) {
            case CompareOp::Eq: tighten_lo(c, false); tighten_hi(c, false); break;
            case CompareOp::Ne: excluded.insert(c); break;
            case CompareOp::Lt: tighten_hi(c, true); break;
            case CompareOp::Le: tighten_hi(c, false); break;
            case CompareOp::Gt: tighten_lo(c, true); break;
            case CompareOp::Ge: tighten_lo(c, false); break;
        }
    }

    void tighten_lo(double v, bool open) {
        if (v > lo || (v == lo && open && !lo_open)) {
            lo = v;
            lo_open = open;
        }
    }
    void tighten_hi(double v, bool open) {
        if (v < hi || (v == hi && open && !hi_open)) {
            hi = v;
            hi_open = open;
        }
    }

    void add_bool(const Literal& l) {
        // Two-valued domain: x != c is the same as x == !c.
        bool want = l.constant.as_bool();
        if (l.op == CompareOp::Ne) want = !want;
        if (pinned_bool && *pinned_bool != want) contradictory = true;
        pinned_bool = want;
    }

    void add_text(const Literal& l) {
        const std::string& c = l.constant.as_text();
        if (l.op == CompareOp::Eq) {
            if (pinned_text && *pinned_text != c) contradictory = true;
            pinned_text = c;
        } else {
            excluded_text.insert(c);
        }
    }

    // Drop exclusions that coincide with closed endpoints by opening the
    // endpoint, and discard exclusions outside the interval. Makes interval
    // containment checks exact over a dense domain.
    void normalize() {
        if (domain != DomainKind::Numeric) return;
        for (auto it = excluded.begin(); it != excluded.end();) {
            if (*it == lo && !lo_open) {
                lo_open = true;
                it = excluded.erase(it);
            } else if (*it == hi && !hi_open) {
                hi_open = true;
                it = excluded.erase(it);
            } else if (*it < lo || *it > hi || (*it == lo && lo_open) || (*it == hi && hi_open)) {
                it = excluded.erase(it);
            } else {
                ++it;
            }
        }
    }

    bool is_empty() const {
        if (contradictory) return true;
        switch (domain.value()) {
            case DomainKind::Numeric:
                if (lo > hi) return true;
                if (lo == hi && (lo_open || hi_open)) return true;
                if (lo == hi && excluded.count(lo)) return true;
                return false;
            case DomainKind::Boolean:
                return false;  // merge already folded contradictions
            case DomainKind::Textual:
                return pinned_text && excluded_text.count(*pinned_text) > 0;
        }
        return false;
    }

    bool contains_point(double v) const {
        if (v < lo || v > hi) return false;
        if (v == lo && lo_open) return false;
        if (v == hi && hi_open) return false;
        return excluded.count(v) == 0;
    }

    // Is this set a subset of rhs? Both must be normalized and non-empty.
    bool subset_of(const std::string& var, const VarConstraint& rhs) const {
        if (*domain != *rhs.domain)
            throw TypeMismatchError(var, domain_name(*rhs.domain), domain_name(*domain));
        switch (*domain) {
            case DomainKind::Numeric: {
                // Lower edge: rhs must admit everything from our lower edge.
                if (rhs.lo > lo) return false;
                if (rhs.lo == lo && rhs.lo_open && !lo_open) return false;
                if (rhs.hi < hi) return false;
                if (rhs.hi == hi && rhs.hi_open && !hi_open) return false;
                for (double e : rhs.excluded)
                    if (contains_point(e)) return false;
                return true;
            }
            case DomainKind::Boolean: {
                if (!rhs.pinned_bool) return true;
                return pinned_bool && *pinned_bool == *rhs.pinned_bool;
            }
            case DomainKind::Textual: {
                if (pinned_text) {
                    if (rhs.pinned_text) return *pinned_text == *rhs.pinned_text;
                    return rhs.excluded_text.count(*pinned_text) == 0;
                }
                if (rhs.pinned_text) return false;  // we admit infinitely many values
                for (const auto& e : rhs.excluded_text)
                    if (excluded_text.count(e) == 0) return false;
                return true;
            }
        }
        return false;
    }
};

std::map<std::string, VarConstraint> build_constraints(const Condition& c) {
    std::map<std::string, VarConstraint> out;
    for (const Literal& l : c.literals()) out[l.variable].add(l);
    for (auto& [name, vc] : out) vc.normalize();
    return out;
}

}  // namespace

bool implies(const Condition& a, const Condition& b) {
    auto ca = build_constraints(a);
    auto cb = build_constraints(b);

    // An unsatisfiable antecedent implies anything.
    for (const auto& [name, vc] : ca)
        if (vc.is_empty()) return true;

    for (const auto& [name, vcb] : cb) {
        auto it = ca.find(name);
        if (it == ca.end()) return false;  // a leaves the variable unconstrained
        if (!it->second.subset_of(name, vcb)) return false;
    }
    return true;
}

bool satisfiable(const Condition& c) {
    auto cs = build_constraints(c);
    for (const auto& [name, vc] : cs)
        if (vc.is_empty()) return false;
    return true;
}

}  // namespace btweave
