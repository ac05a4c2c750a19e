#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "btweave/condition.hpp"
#include "btweave/value.hpp"

namespace btweave {

class WorldState;

enum class Status { Running, Success, Failure };

char to_char(Status s);             // 'R' / 'S' / 'F'
std::string to_string(Status s);    // "Running" / "Success" / "Failure"
Status status_from_char(char c);    // throws Error on anything else

using Params = std::map<std::string, Value>;

// A registered executable action. The step function may modify the world;
// once settled it should behave as a status query until re-entered (the
// executor's opt-in purity diagnostic checks the strict reading where only
// Running steps mutate).
struct ActionImpl {
    std::string name;
    std::function<Status(WorldState&, const Params&)> step;
    // Invoked once when a Running action is preempted or halted.
    std::function<void(WorldState&, const Params&)> on_halt;
};

class ActionRegistry {
  public:
    void add(ActionImpl impl);                          // DuplicateActionError
    const ActionImpl& find(const std::string& n) const; // UnboundActionError
    bool has(const std::string& n) const;

  private:
    std::map<std::string, ActionImpl> actions_;
};

enum class NodeKind { Sequence, Fallback, SequenceMem, Condition, Action, Lookup, Remote };

std::string to_string(NodeKind k);

class TreeNode;
using TreeNodePtr = std::unique_ptr<TreeNode>;

// One BT node. Composites own their children; leaves have none except
// Lookup, which may adopt a single child subtree (its resolved achiever).
class TreeNode {
  public:
    static TreeNodePtr sequence(std::string id, std::vector<TreeNodePtr> children);
    static TreeNodePtr fallback(std::string id, std::vector<TreeNodePtr> children);
    static TreeNodePtr sequence_mem(std::string id, std::vector<TreeNodePtr> children);
    static TreeNodePtr condition(std::string id, Condition c);
    static TreeNodePtr action(std::string id, std::string action_name, Params bindings);
    static TreeNodePtr lookup(std::string id, Condition wanted_post);
    static TreeNodePtr remote(std::string id, std::string host, std::string tree);

    NodeKind kind = NodeKind::Sequence;
    std::string id;
    std::vector<TreeNodePtr> children;

    Condition cond;            // Condition leaf; Lookup's wanted post
    std::string action_name;   // Action leaf
    Params bindings;           // Action leaf
    std::string remote_host;   // Remote leaf
    std::string remote_tree;   // Remote leaf

    // Per-activation execution state (reset by halt).
    std::size_t memory_index = 0;  // SequenceMem: first not-yet-succeeded child
    int running_child = -1;        // composites: child Running after last tick
    bool action_running = false;   // Action/Remote: last step returned Running

    // Deep copy of the structure; execution state starts fresh.
    TreeNodePtr clone() const;

    // Structural checks: unique ids, leaf arity, Lookup arity <= 1.
    // Throws Error on violation.
    void validate() const;
};

// Everything a tick appended to the log: one record per node ticked, in
// completion (post-) order. t is the clock at the start of tick k.
struct TickRecord {
    int k = 0;
    std::string node;
    Status status = Status::Running;
    double t = 0.0;

    bool operator==(const TickRecord& rhs) const {
        return k == rhs.k && node == rhs.node && status == rhs.status && t == rhs.t;
    }
};

struct TickTrace {
    std::vector<TickRecord> records;

    // Line-oriented, bit-exact: `k=<int> node=<id> status=<R|S|F> t=<real>`.
    std::string to_text() const;
    static TickTrace from_text(const std::string& text);  // DecodeError

    bool operator==(const TickTrace& rhs) const { return records == rhs.records; }
};

}  // namespace btweave
