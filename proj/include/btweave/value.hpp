#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace btweave {

enum class ValueType { Bool, Int, Real, String, Enum };

std::string to_string(ValueType t);

// A typed world value. Reals carry an optional unit tag; Enum holds a bare
// symbol (an enumeration literal written without quotes).
class Value {
  public:
    Value() : data_(false) {}

    static Value boolean(bool v);
    static Value integer(std::int64_t v);
    static Value real(double v, std::string unit = "");
    static Value string(std::string v);
    static Value symbol(std::string v);

    ValueType type() const;

    bool as_bool() const;
    std::int64_t as_int() const;
    double as_real() const;  // accepts Int and Real
    const std::string& as_text() const;  // accepts String and Enum
    const std::string& unit() const;     // empty unless a unit-tagged Real

    bool is_numeric() const { return type() == ValueType::Int || type() == ValueType::Real; }
    bool is_textual() const { return type() == ValueType::String || type() == ValueType::Enum; }

    // Canonical printing: true/false, 42, 1.5 (shortest round-trip), "s", sym.
    std::string to_string() const;

    // Exact structural equality (type, payload, and unit all equal).
    bool operator==(const Value& rhs) const { return data_ == rhs.data_; }
    bool operator!=(const Value& rhs) const { return !(*this == rhs); }

  private:
    struct RealV {
        double v;
        std::string unit;
        bool operator==(const RealV&) const = default;
    };
    struct EnumV {
        std::string name;
        bool operator==(const EnumV&) const = default;
    };
    using Data = std::variant<bool, std::int64_t, RealV, std::string, EnumV>;

    explicit Value(Data d) : data_(std::move(d)) {}
    Data data_;
};

// Shortest round-trip decimal rendering of a double.
std::string format_real(double v);

}  // namespace btweave
