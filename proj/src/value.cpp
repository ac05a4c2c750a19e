#include "btweave/value.hpp"

#include <charconv>
#include <system_error>

#include "btweave/errors.hpp"

namespace btweave {

std::string to_string(ValueType t) {
    switch (t) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "int";
        case ValueType::Real: return "real";
        case ValueType::String: return "string";
        case ValueType::Enum: return "enum";
    }
    return "?";
}

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Value Value::boolean(bool v) { return Value(Data{v}); }
Value Value::integer(std::int64_t v) { return Value(Data{v}); }
Value Value::real(double v, std::string unit) { return Value(Data{RealV{v, std::move(unit)}}); }
Value Value::string(std::string v) { return Value(Data{std::move(v)}); }
Value Value::symbol(std::string v) { return Value(Data{EnumV{std::move(v)}}); }

ValueType Value::type() const {
    switch (data_.index()) {
        case 0: return ValueType::Bool;
        case 1: return ValueType::Int;
        case 2: return ValueType::Real;
        case 3: return ValueType::String;
        default: return ValueType::Enum;
    }
}

bool Value::as_bool() const {
    if (auto* b = std::get_if<bool>(&data_)) return *b;
    throw TypeMismatchError("<value>", "bool", btweave::to_string(type()));
}

std::int64_t Value::as_int() const {
    if (auto* i = std::get_if<std::int64_t>(&data_)) return *i;
    throw TypeMismatchError("<value>", "int", btweave::to_string(type()));
}

double Value::as_real() const {
    if (auto* i = std::get_if<std::int64_t>(&data_)) return static_cast<double>(*i);
    if (auto* r = std::get_if<RealV>(&data_)) return r->v;
    throw TypeMismatchError("<value>", "real", btweave::to_string(type()));
}

const std::string& Value::as_text() const {
    if (auto* s = std::get_if<std::string>(&data_)) return *s;
    if (auto* e = std::get_if<EnumV>(&data_)) return e->name;
    throw TypeMismatchError("<value>", "string", btweave::to_string(type()));
}

const std::string& Value::unit() const {
    static const std::string empty;
    if (auto* r = std::get_if<RealV>(&data_)) return r->unit;
    return empty;
}

static void escape_string_into(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
}

std::string Value::to_string() const {
    switch (type()) {
        case ValueType::Bool: return as_bool() ? "true" : "false";
        case ValueType::Int: return std::to_string(as_int());
        case ValueType::Real: {
            std::string s = format_real(as_real());
            // A bare integral rendering would re-lex as Int; force Real.
            if (s.find_first_of(".eEnif") == std::string::npos) s += ".0";
            return s;
        }
        case ValueType::String: {
            std::string out;
            escape_string_into(std::get<std::string>(data_), out);
            return out;
        }
        case ValueType::Enum: return std::get<EnumV>(data_).name;
    }
    return "?";
}

}  // namespace btweave
