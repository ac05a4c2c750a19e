#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "btweave/bt.hpp"
#include "btweave/value.hpp"

namespace btweave {

// One protocol message as it travels over a link. TICK/HALT/STATUS run the
// tick-synchronization protocol on control links; DATA carries typed port
// values on data links.
enum class MsgKind { Tick, Halt, Status, Data };

std::string to_string(MsgKind k);

struct Message {
    std::uint64_t seq = 0;
    MsgKind kind = MsgKind::Tick;
    std::string node;
    std::optional<Status> status;  // STATUS only
    std::optional<Value> data;     // DATA only

    bool operator==(const Message& o) const {
        return seq == o.seq && kind == o.kind && node == o.node && status == o.status &&
               data == o.data;
    }
};

// Canonical line form:
//   seq=<u64> kind=<TICK|HALT|STATUS|DATA> node=<id> [status=<R|S|F>]
//   [type=<t> value=<v>]\n
// Field payloads are percent-escaped so ids and values may contain spaces.
// decode(encode(m)) == m, and encode(decode(line)) reproduces the line
// byte for byte.
std::string wire_encode(const Message& m);
Message wire_decode(const std::string& line);  // trailing newline optional

}  // namespace btweave
