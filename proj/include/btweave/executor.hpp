#pragma once

#include <functional>
#include <vector>

#include "btweave/bt.hpp"
#include "btweave/world_state.hpp"

namespace btweave {

// Ticks one tree against one world. Non-owning: the tree, world, and action
// registry outlive the executor. Strictly sequential.
class Executor {
  public:
    Executor(TreeNode& root, WorldState& world, const ActionRegistry& actions);

    // One tick of the whole tree: evaluates the root, appends trace records
    // (post-order, clock sampled at tick start), advances the clock by dt,
    // then runs post_tick (plant dynamics, disturbance injection, ...).
    Status tick_once();

    // Ticks until the root settles (Success, or Failure when stop_on_failure)
    // or the budget runs out; returns the last root status.
    struct RunResult {
        Status status = Status::Running;
        int ticks = 0;  // ticks actually executed
    };
    RunResult run(int max_ticks, bool stop_on_failure = true);

    // Preempts everything: Running actions get their on_halt hook, memories
    // and bookkeeping reset; the next tick starts fresh.
    void halt();

    const TickTrace& trace() const { return trace_; }
    TickTrace& trace() { return trace_; }
    int ticks_executed() const { return tick_index_; }
    WorldState& world() { return *world_; }

    // Hooks wired by other modules; all optional.
    std::function<void(WorldState&)> post_tick;
    // backchain: resolves an achiever subtree for a bare Lookup at first tick.
    std::function<TreeNodePtr(const Condition&)> lookup_resolver;
    // runtime: remote-proxy leaves delegate here.
    std::function<Status(TreeNode&, WorldState&)> remote_tick;
    std::function<void(TreeNode&)> remote_halt;
    // runtime: records are also appended here (merged deployment traces).
    TickTrace* trace_sink = nullptr;

    // Opt-in diagnostic: snapshot check that actions only mutate while
    // Running; throws Error on violation. Off by default because an action
    // may legitimately apply its final update on the tick it settles.
    bool verify_action_purity = false;

  private:
    Status tick_node(TreeNode& n);
    Status tick_composite(TreeNode& n);
    Status tick_sequence_mem(TreeNode& n);
    Status tick_action(TreeNode& n);
    Status tick_lookup(TreeNode& n);
    void halt_node(TreeNode& n);
    void record(const TreeNode& n, Status s);

    TreeNode* root_;
    WorldState* world_;
    const ActionRegistry* actions_;
    TickTrace trace_;
    int tick_index_ = 0;
    double tick_clock_ = 0.0;  // clock at the start of the current tick
};

// Empirical Finite-Time-Success check: from every initial state, tick the
// closed loop until Success or `bound` ticks. Failure is not terminal — the
// loop keeps ticking (the tree stays reactive). Violating states are listed.
struct FtsReport {
    bool holds = false;
    int bound = 0;
    std::size_t states_checked = 0;
    struct Violation {
        WorldState state;       // the initial state that never reached Success
        Status last = Status::Running;
        int ticks = 0;
    };
    std::vector<Violation> violations;

    std::string to_text() const;
};

inline constexpr std::size_t kMaxFtsStates = 100000;

FtsReport check_fts(TreeNode& root, const ActionRegistry& actions,
                    const std::vector<WorldState>& states, int bound,
                    const std::function<void(WorldState&)>& post_tick = nullptr);

}  // namespace btweave
