#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "btweave/bt.hpp"

namespace btweave {

// ---------------------------------------------------------------------------
// Role automata
//
// The tick-synchronization protocol couples a parent role (the side that owns
// the remote-proxy leaf) and a child role (the side running the subtree).
// Message labels: TICK, HALT (parent->child), STATUS_R/S/F, HALT_ACK
// (child->parent). Alphabets are declared, not derived from transitions, so
// a mutant that *omits* a message still composes (and gets caught by the
// consistency check instead of an alphabet error).
// ---------------------------------------------------------------------------

struct RoleAutomaton {
    enum class Dir { Input, Output };
    struct Transition {
        Dir dir = Dir::Input;
        std::string msg;
        std::string to;
    };

    std::string name;
    std::string initial;
    std::vector<std::string> state_order;  // declaration order, for stable output
    std::map<std::string, std::vector<Transition>> states;
    std::set<std::string> accepting;
    std::set<std::string> inputs;
    std::set<std::string> outputs;

    // Structural checks: known initial/accepting/target states, input
    // determinism per (state, message), transition labels within the
    // declared alphabets. Throws Error.
    void validate() const;

    // Text form: `role <name>` header, then per state
    //   `state <name> [initial] [accept]` with indented
    //   `on <msg> -> <state>` / `emit <msg> -> <state>` lines, plus
    //   `inputs ...` / `outputs ...` alphabet lines.
    std::string to_text() const;
};

// Parses one or more roles from the text format. Throws SyntaxError.
std::vector<RoleAutomaton> parse_roles(const std::string& text);

// The canonical, shipped protocol pair (parent, child).
std::pair<RoleAutomaton, RoleAutomaton> builtin_roles();

// Shipped broken variants, each tripping the checker differently:
RoleAutomaton mutant_double_tick_parent();  // emits TICK twice -> channel overflow
RoleAutomaton mutant_silent_child();        // never answers a tick -> deadlock
RoleAutomaton mutant_pingpong_parent();     // never halts; pair with the next one
RoleAutomaton mutant_pingpong_child();      // never settles -> livelock together
RoleAutomaton mutant_deaf_child();          // ignores HALT -> deadlock
RoleAutomaton mutant_wrong_ack_child();     // acks halt with a status -> deadlock

// ---------------------------------------------------------------------------
// Product automaton (external composition)
// ---------------------------------------------------------------------------

// One global state of the coupled pair: both role states plus the in-flight
// message per direction (empty string = channel free; capacity 1).
struct ProductState {
    std::string parent, child;
    std::string chan_pc, chan_cp;

    bool operator<(const ProductState& o) const {
        return std::tie(parent, child, chan_pc, chan_cp) <
               std::tie(o.parent, o.child, o.chan_pc, o.chan_cp);
    }
    bool operator==(const ProductState& o) const {
        return parent == o.parent && child == o.child && chan_pc == o.chan_pc &&
               chan_cp == o.chan_cp;
    }
    std::string to_string() const;
};

// A step label reads `parent!TICK` (emit) or `child?TICK` (consume).
struct ProductTransition {
    std::string label;
    std::size_t to = 0;
};

struct OverflowEvent {
    std::size_t state = 0;     // where the blocked emission was attempted
    std::string label;         // the emission that found its channel full
};

struct ProtocolAutomaton {
    RoleAutomaton parent, child;
    std::vector<ProductState> states;           // index 0 = initial
    std::vector<std::vector<ProductTransition>> transitions;
    std::vector<bool> accepting;
    std::vector<OverflowEvent> overflows;

    std::size_t state_count() const { return states.size(); }
};

// Exhaustive 1-bounded-channel product. Throws AlphabetMismatchError when the
// declared alphabets are not dual. Emissions into a full channel are recorded
// as OverflowEvents and not expanded.
ProtocolAutomaton compose(const RoleAutomaton& parent, const RoleAutomaton& child);

// ---------------------------------------------------------------------------
// Consistency checking
// ---------------------------------------------------------------------------

enum class FindingKind { Deadlock, Livelock, ChannelOverflow, AcceptanceUnreachable };

std::string to_string(FindingKind k);

struct Finding {
    FindingKind kind = FindingKind::Deadlock;
    std::string state;                  // rendering of the flagged state
    std::vector<std::string> witness;   // shortest replayable label trace
    std::string detail;
};

struct ConsistencyReport {
    bool consistent = false;            // no deadlocks and no livelocks
    std::size_t states_explored = 0;
    std::vector<Finding> findings;      // deadlocks, livelocks, overflows

    std::string to_text() const;
};

ConsistencyReport check_consistency(const ProtocolAutomaton& p);

// Replays a witness label sequence on a role pair; returns the state reached.
// Throws Error when any step is illegal (used to validate witnesses).
ProductState replay_witness(const RoleAutomaton& parent, const RoleAutomaton& child,
                            const std::vector<std::string>& labels);

// ---------------------------------------------------------------------------
// Internal composition
// ---------------------------------------------------------------------------

// Bounded model check of a coordinator BT driving one parent-role endpoint
// per leaf, with abstract (nondeterministic) child replies. Verifies that
// every reachable configuration can still reach a session end (root Success
// or Failure) with every link quiescent in its acceptance condition.
struct InternalCheckOptions {
    // the engine halts preempted running leaves; switching this off models a
    // coordinator that leaks running children (a constructed defect)
    bool halt_preempted_leaves = true;
    std::size_t max_configs = 100000;
};

ConsistencyReport check_internal_composition(const std::vector<const RoleAutomaton*>& roles,
                                             const TreeNode& coordinator,
                                             const InternalCheckOptions& opts = {});

}  // namespace btweave
