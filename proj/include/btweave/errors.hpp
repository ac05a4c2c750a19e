#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace btweave {

// Base class for all engine errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownVariableError : Error {
    explicit UnknownVariableError(const std::string& name)
        : Error("unknown variable '" + name + "'"), variable(name) {}
    std::string variable;
};

struct TypeMismatchError : Error {
    TypeMismatchError(const std::string& variable_, const std::string& expected_,
                      const std::string& actual_)
        : Error("type mismatch on '" + variable_ + "': expected " + expected_ +
                ", got " + actual_),
          variable(variable_),
          expected(expected_),
          actual(actual_) {}
    std::string variable;
    std::string expected;
    std::string actual;
};

// Syntax error in the condition grammar. offset is the 1-based character
// position where the parser stopped (one past the end for truncated input).
struct ConditionParseError : Error {
    ConditionParseError(std::size_t offset_, const std::string& expected_)
        : Error("syntax error at offset " + std::to_string(offset_) + ": expected " +
                expected_),
          offset(offset_),
          expected(expected_) {}
    std::size_t offset;
    std::string expected;
};

struct UnboundActionError : Error {
    explicit UnboundActionError(const std::string& name)
        : Error("unbound action '" + name + "'"), action(name) {}
    std::string action;
};

struct MissingParamError : Error {
    explicit MissingParamError(const std::string& name)
        : Error("missing value for parameter '" + name + "'"), param(name) {}
    std::string param;
};

struct DuplicateActionError : Error {
    explicit DuplicateActionError(const std::string& name)
        : Error("action '" + name + "' already registered"), action(name) {}
    std::string action;
};

struct DuplicateSkillError : Error {
    explicit DuplicateSkillError(const std::string& name)
        : Error("skill '" + name + "' already registered"), skill(name) {}
    std::string skill;
};

struct UnsatisfiablePostError : Error {
    explicit UnsatisfiablePostError(const std::string& name)
        : Error("postcondition of skill '" + name + "' is unsatisfiable"), skill(name) {}
    std::string skill;
};

struct InterfaceError : Error {
    using Error::Error;
};

struct DepthExceededError : Error {
    using Error::Error;
};

struct AlphabetMismatchError : Error {
    using Error::Error;
};

struct RoleReuseError : Error {
    explicit RoleReuseError(const std::string& role)
        : Error("role '" + role + "' used more than once"), name(role) {}
    std::string name;
};

struct StateSpaceTooLargeError : Error {
    using Error::Error;
};

// Wire decoding failure. offset is the 0-based byte offset of the bad input.
struct DecodeError : Error {
    DecodeError(std::size_t offset_, const std::string& what_)
        : Error("decode error at offset " + std::to_string(offset_) + ": " + what_),
          offset(offset_) {}
    std::size_t offset;
};

struct TransportError : Error {
    using Error::Error;
};

struct UnlinkedPortError : Error {
    explicit UnlinkedPortError(const std::string& port)
        : Error("data port '" + port + "' is not linked") {}
};

// One or more dangling cross-references in a parsed document. Each issue
// string carries its own source position.
struct ResolutionError : Error {
    explicit ResolutionError(std::vector<std::string> issues_)
        : Error(render(issues_)), issues(std::move(issues_)) {}
    std::vector<std::string> issues;

  private:
    static std::string render(const std::vector<std::string>& list) {
        std::string out = "unresolved references:";
        for (const std::string& s : list) out += "\n  " + s;
        return out;
    }
};

// Syntax error in a DSL or role-automaton file. Line and column are 1-based.
struct SyntaxError : Error {
    SyntaxError(int line_, int col_, const std::string& expected_)
        : Error("syntax error at " + std::to_string(line_) + ":" + std::to_string(col_) +
                ": expected " + expected_),
          line(line_),
          col(col_),
          expected(expected_) {}
    int line;
    int col;
    std::string expected;
};

}  // namespace btweave
