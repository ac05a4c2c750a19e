#include "btweave/executor.hpp"

#include "btweave/errors.hpp"

namespace btweave {

Executor::Executor(TreeNode& root, WorldState& world, const ActionRegistry& actions)
    : root_(&root), world_(&world), actions_(&actions) {
    root.validate();
}

void Executor::record(const TreeNode& n, Status s) {
    trace_.records.push_back({tick_index_, n.id, s, tick_clock_});
    if (trace_sink) trace_sink->records.push_back(trace_.records.back());
}

Status Executor::tick_once() {
    tick_clock_ = world_->clock();
    Status s = tick_node(*root_);
    world_->advance_clock();
    if (post_tick) post_tick(*world_);
    ++tick_index_;
    return s;
}

Executor::RunResult Executor::run(int max_ticks, bool stop_on_failure) {
    RunResult res;
    for (int i = 0; i < max_ticks; ++i) {
        res.status = tick_once();
        ++res.ticks;
        if (res.status == Status::Success) break;
        if (stop_on_failure && res.status == Status::Failure) break;
    }
    return res;
}

void Executor::halt() { halt_node(*root_); }

Status Executor::tick_node(TreeNode& n) {
    Status s = Status::Failure;
    switch (n.kind) {
        case NodeKind::Sequence:
        case NodeKind::Fallback:
            s = tick_composite(n);
            break;
        case NodeKind::SequenceMem:
            s = tick_sequence_mem(n);
            break;
        case NodeKind::Condition:
            s = eval_condition(n.cond, *world_) ? Status::Success : Status::Failure;
            break;
        case NodeKind::Action:
            s = tick_action(n);
            break;
        case NodeKind::Lookup:
            s = tick_lookup(n);
            break;
        case NodeKind::Remote:
            if (!remote_tick) throw Error("remote leaf '" + n.id + "' outside a deployment");
            s = remote_tick(n, *world_);
            n.action_running = (s == Status::Running);
            break;
    }
    record(n, s);
    return s;
}

// Sequence and Fallback share control flow: tick children left to right,
// continuing past the pass-through status (Success for Sequence, Failure for
// Fallback); the first other status decides. A child left Running on an
// earlier tick that the control path no longer reaches is preempted (halted).
Status Executor::tick_composite(TreeNode& n) {
    const Status pass = n.kind == NodeKind::Sequence ? Status::Success : Status::Failure;
    Status result = pass;
    int running_now = -1;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        Status s = tick_node(*n.children[i]);
        if (s == pass) continue;
        result = s;
        if (s == Status::Running) running_now = static_cast<int>(i);
        break;
    }
    if (n.running_child >= 0 && n.running_child != running_now)
        halt_node(*n.children[static_cast<std::size_t>(n.running_child)]);
    n.running_child = running_now;
    return result;
}

// Sequence with memory: children that already succeeded in this activation
// are skipped; memory clears when the node itself settles.
Status Executor::tick_sequence_mem(TreeNode& n) {
    while (n.memory_index < n.children.size()) {
        TreeNode& child = *n.children[n.memory_index];
        Status s = tick_node(child);
        if (s == Status::Running) {
            n.running_child = static_cast<int>(n.memory_index);
            return s;
        }
        if (s == Status::Failure) {
            n.memory_index = 0;
            n.running_child = -1;
            return s;
        }
        ++n.memory_index;
        n.running_child = -1;
    }
    n.memory_index = 0;
    n.running_child = -1;
    return Status::Success;
}

Status Executor::tick_action(TreeNode& n) {
    const ActionImpl& impl = actions_->find(n.action_name);
    Status s;
    if (verify_action_purity) {
        const WorldState before = *world_;
        s = impl.step(*world_, n.bindings);
        if (s != Status::Running && !(*world_ == before))
            throw Error("action '" + n.action_name +
                        "' modified the world outside its running region");
    } else {
        s = impl.step(*world_, n.bindings);
    }
    n.action_running = (s == Status::Running);
    return s;
}

Status Executor::tick_lookup(TreeNode& n) {
    if (n.children.empty()) {
        if (lookup_resolver) {
            TreeNodePtr resolved = lookup_resolver(n.cond);
            if (resolved) n.children.push_back(std::move(resolved));
        }
        if (n.children.empty()) return Status::Failure;  // unresolvable lookup
    }
    return tick_node(*n.children[0]);
}

void Executor::halt_node(TreeNode& n) {
    switch (n.kind) {
        case NodeKind::Action:
            if (n.action_running) {
                const ActionImpl& impl = actions_->find(n.action_name);
                if (impl.on_halt) impl.on_halt(*world_, n.bindings);
                n.action_running = false;
            }
            return;
        case NodeKind::Remote:
            if (n.action_running) {
                if (remote_halt) remote_halt(n);
                n.action_running = false;
            }
            return;
        case NodeKind::Condition:
            return;
        default:
            break;
    }
    for (TreeNodePtr& c : n.children) halt_node(*c);
    n.memory_index = 0;
    n.running_child = -1;
}

// ---------------------------------------------------------------------------
// check_fts
// ---------------------------------------------------------------------------

FtsReport check_fts(TreeNode& root, const ActionRegistry& actions,
                    const std::vector<WorldState>& states, int bound,
                    const std::function<void(WorldState&)>& post_tick) {
    if (bound < 1) throw Error("fts bound must be >= 1");
    if (states.size() > kMaxFtsStates)
        throw StateSpaceTooLargeError("fts state space exceeds " +
                                      std::to_string(kMaxFtsStates) + " states");
    FtsReport report;
    report.bound = bound;
    report.states_checked = states.size();
    for (const WorldState& s0 : states) {
        TreeNodePtr tree = root.clone();
        WorldState w = s0;
        Executor ex(*tree, w, actions);
        ex.post_tick = post_tick;
        Status last = Status::Running;
        int ticks = 0;
        bool reached = false;
        for (; ticks < bound; ++ticks) {
            last = ex.tick_once();
            if (last == Status::Success) {
                reached = true;
                ++ticks;
                break;
            }
        }
        if (!reached) report.violations.push_back({s0, last, ticks});
    }
    report.holds = report.violations.empty();
    return report;
}

std::string FtsReport::to_text() const {
    std::string out = "fts: ";
    out += holds ? "holds" : "violated";
    out += " states=" + std::to_string(states_checked) + " bound=" + std::to_string(bound) +
           "\n";
    for (const Violation& v : violations) {
        out += "violating state (last=" + std::string(1, to_char(v.last)) +
               " after " + std::to_string(v.ticks) + " ticks):\n";
        std::string s = v.state.to_string();
        // indent the state dump
        std::size_t start = 0;
        while (start < s.size()) {
            std::size_t end = s.find('\n', start);
            if (end == std::string::npos) end = s.size();
            out += "  " + s.substr(start, end - start) + "\n";
            start = end + 1;
        }
    }
    return out;
}

}  // namespace btweave
