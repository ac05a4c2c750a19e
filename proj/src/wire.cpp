#include "btweave/wire.hpp"

#include <cstdlib>

#include "btweave/errors.hpp"

namespace btweave {

std::string to_string(MsgKind k) {
    switch (k) {
        case MsgKind::Tick: return "TICK";
        case MsgKind::Halt: return "HALT";
        case MsgKind::Status: return "STATUS";
        case MsgKind::Data: return "DATA";
    }
    return "?";
}

namespace {

bool needs_escape(unsigned char c) {
    return c == '%' || c == '=' || c == ' ' || c < 0x20 || c == 0x7f;
}

std::string escape_field(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (needs_escape(c)) {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xf];
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string unescape_field(const std::string& s, std::size_t base) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out += s[i];
            continue;
        }
        if (i + 2 >= s.size())
            throw DecodeError(base + i, "truncated percent escape");
        int hi = hex_digit(s[i + 1]), lo = hex_digit(s[i + 2]);
        if (hi < 0 || lo < 0) throw DecodeError(base + i, "bad percent escape");
        out += static_cast<char>((hi << 4) | lo);
        i += 2;
    }
    return out;
}

// value rendering per type, chosen so a decode/encode cycle is byte-stable
std::string value_text(const Value& v) {
    switch (v.type()) {
        case ValueType::Bool: return v.as_bool() ? "true" : "false";
        case ValueType::Int: return std::to_string(v.as_int());
        case ValueType::Real: return format_real(v.as_real());
        case ValueType::String:
        case ValueType::Enum: return v.as_text();
    }
    return "";
}

std::string type_token(const Value& v) {
    switch (v.type()) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "int";
        case ValueType::Real:
            return v.unit().empty() ? "real" : "real:" + escape_field(v.unit());
        case ValueType::String: return "string";
        case ValueType::Enum: return "enum";
    }
    return "?";
}

// pulls `key=payload` (payload runs to the next space or end) and advances pos
std::string take_field(const std::string& line, std::size_t& pos, const std::string& key) {
    const std::string prefix = key + "=";
    if (line.compare(pos, prefix.size(), prefix) != 0)
        throw DecodeError(pos, "expected '" + key + "='");
    pos += prefix.size();
    std::size_t end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    std::string raw = line.substr(pos, end - pos);
    pos = end;
    return raw;
}

void skip_space(const std::string& line, std::size_t& pos) {
    if (pos >= line.size() || line[pos] != ' ')
        throw DecodeError(pos, "expected ' '");
    ++pos;
}

}  // namespace

std::string wire_encode(const Message& m) {
    std::string out = "seq=" + std::to_string(m.seq);
    out += " kind=" + to_string(m.kind);
    out += " node=" + escape_field(m.node);
    if (m.kind == MsgKind::Status) {
        if (!m.status) throw Error("STATUS message without a status payload");
        out += " status=";
        out += to_char(*m.status);
    }
    if (m.kind == MsgKind::Data) {
        if (!m.data) throw Error("DATA message without a data payload");
        out += " type=" + type_token(*m.data);
        out += " value=" + escape_field(value_text(*m.data));
    }
    out += "\n";
    return out;
}

Message wire_decode(const std::string& input) {
    std::string line = input;
    if (!line.empty() && line.back() == '\n') line.pop_back();
    if (line.find('\n') != std::string::npos)
        throw DecodeError(line.find('\n'), "embedded newline");

    Message m;
    std::size_t pos = 0;

    const std::string seq_raw = take_field(line, pos, "seq");
    if (seq_raw.empty()) throw DecodeError(pos, "sequence number");
    {
        char* end = nullptr;
        m.seq = std::strtoull(seq_raw.c_str(), &end, 10);
        if (*end != '\0' || seq_raw[0] == '-')
            throw DecodeError(pos - seq_raw.size(), "unsigned sequence number");
    }

    skip_space(line, pos);
    const std::string kind_raw = take_field(line, pos, "kind");
    if (kind_raw == "TICK") m.kind = MsgKind::Tick;
    else if (kind_raw == "HALT") m.kind = MsgKind::Halt;
    else if (kind_raw == "STATUS") m.kind = MsgKind::Status;
    else if (kind_raw == "DATA") m.kind = MsgKind::Data;
    else throw DecodeError(pos - kind_raw.size(), "TICK, HALT, STATUS or DATA");

    skip_space(line, pos);
    std::size_t node_at = pos;
    m.node = unescape_field(take_field(line, pos, "node"), node_at + 5);

    if (m.kind == MsgKind::Status) {
        skip_space(line, pos);
        const std::string st = take_field(line, pos, "status");
        if (st != "R" && st != "S" && st != "F")
            throw DecodeError(pos - st.size(), "R, S or F");
        m.status = status_from_char(st[0]);
    }
    if (m.kind == MsgKind::Data) {
        skip_space(line, pos);
        std::size_t type_at = pos;
        const std::string ty = take_field(line, pos, "type");
        skip_space(line, pos);
        std::size_t value_at = pos;
        const std::string raw = take_field(line, pos, "value");
        const std::string text = unescape_field(raw, value_at + 6);
        if (ty == "bool") {
            if (text == "true") m.data = Value::boolean(true);
            else if (text == "false") m.data = Value::boolean(false);
            else throw DecodeError(value_at + 6, "true or false");
        } else if (ty == "int") {
            char* end = nullptr;
            long long v = std::strtoll(text.c_str(), &end, 10);
            if (text.empty() || *end != '\0')
                throw DecodeError(value_at + 6, "integer value");
            m.data = Value::integer(v);
        } else if (ty == "real" || ty.rfind("real:", 0) == 0) {
            char* end = nullptr;
            double v = std::strtod(text.c_str(), &end);
            if (text.empty() || *end != '\0') throw DecodeError(value_at + 6, "real value");
            std::string unit =
                ty == "real" ? "" : unescape_field(ty.substr(5), type_at + 5 + 5);
            m.data = Value::real(v, unit);
        } else if (ty == "string") {
            m.data = Value::string(text);
        } else if (ty == "enum") {
            m.data = Value::symbol(text);
        } else {
            throw DecodeError(type_at + 5, "bool, int, real, string or enum");
        }
    }
    if (pos != line.size()) throw DecodeError(pos, "end of message");
    return m;
}

}  // namespace btweave
