#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "btweave/value.hpp"

namespace btweave {

class WorldState;

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string to_string(CompareOp op);

struct Literal {
    std::string variable;
    CompareOp op = CompareOp::Eq;
    Value constant;

    bool operator==(const Literal& rhs) const {
        return variable == rhs.variable && op == rhs.op && constant == rhs.constant;
    }
};

// A conjunction of comparisons against constants. The empty conjunction is
// trivially true and is how an omitted pre/inv is represented.
class Condition {
  public:
    Condition() = default;
    explicit Condition(std::vector<Literal> literals) : literals_(std::move(literals)) {}

    static Condition always_true() { return Condition{}; }

    bool empty() const { return literals_.empty(); }
    const std::vector<Literal>& literals() const { return literals_; }

    std::string to_string() const;

    bool operator==(const Condition& rhs) const { return literals_ == rhs.literals_; }
    bool operator!=(const Condition& rhs) const { return !(*this == rhs); }

  private:
    std::vector<Literal> literals_;
};

// Parses the grammar
//   cond    := literal ("AND" literal)*
//   literal := IDENT OP value
//   OP      := "==" | "!=" | "<" | "<=" | ">" | ">="
//   value   := BOOL | INT | REAL | STRING | SYMBOL
// Throws ConditionParseError on malformed input.
Condition parse_condition(std::string_view text);

// Evaluates c against w. Total: every referenced variable must exist with a
// comparable type, else UnknownVariableError / TypeMismatchError. Never
// modifies w. Real equality uses absolute tolerance kRealEqEps.
bool eval_condition(const Condition& c, const WorldState& w);

inline constexpr double kRealEqEps = 1e-9;

// True only if every valuation satisfying a satisfies b. Decided per variable
// by interval/equality subsumption; numerics are interpreted over the reals.
// Throws TypeMismatchError when a and b constrain the same variable with
// incomparable types.
bool implies(const Condition& a, const Condition& b);

// True if some valuation satisfies c (per-variable emptiness check).
bool satisfiable(const Condition& c);

}  // namespace btweave
