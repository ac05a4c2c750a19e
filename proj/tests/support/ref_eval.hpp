#pragma once

// Test-support: random BTs over small boolean worlds, synthetic actions
// defined by their success/failure regions, and a reference evaluator that
// transcribes the recursive state-space semantics (status case split per
// composite, at most one action step per tick) directly. The engine must
// agree with it on every tick.

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "btweave/bt.hpp"
#include "btweave/condition.hpp"
#include "btweave/executor.hpp"
#include "btweave/world_state.hpp"

namespace btweave::testsupport {

// An action specified by regions: Success inside `success`, Failure inside
// `failure` (checked second), otherwise Running with `writes` applied.
struct RegionAction {
    std::string name;
    Condition success;
    Condition failure;
    std::vector<std::pair<std::string, bool>> writes;
};

struct RefModel {
    std::vector<RegionAction> actions;

    const RegionAction& find(const std::string& name) const {
        for (const RegionAction& a : actions)
            if (a.name == name) return a;
        throw Error("ref model: no action '" + name + "'");
    }
};

// Pure status r(x): no world writes.
inline Status ref_status(const TreeNode& n, const RefModel& m, const WorldState& w) {
    switch (n.kind) {
        case NodeKind::Condition:
            return eval_condition(n.cond, w) ? Status::Success : Status::Failure;
        case NodeKind::Action: {
            const RegionAction& a = m.find(n.action_name);
            if (eval_condition(a.success, w)) return Status::Success;
            if (eval_condition(a.failure, w)) return Status::Failure;
            return Status::Running;
        }
        case NodeKind::Sequence:
            for (const TreeNodePtr& c : n.children) {
                Status s = ref_status(*c, m, w);
                if (s != Status::Success) return s;
            }
            return Status::Success;
        case NodeKind::Fallback:
            for (const TreeNodePtr& c : n.children) {
                Status s = ref_status(*c, m, w);
                if (s != Status::Failure) return s;
            }
            return Status::Failure;
        default:
            throw Error("ref evaluator only covers Sequence/Fallback/Condition/Action");
    }
}

// One reference tick: the composite case split selects exactly one child to
// execute (the first non-pass one); all earlier children contribute only
// their region membership. Applies the single running action's writes.
inline Status ref_tick(const TreeNode& n, const RefModel& m, WorldState& w) {
    switch (n.kind) {
        case NodeKind::Condition:
            return ref_status(n, m, w);
        case NodeKind::Action: {
            const RegionAction& a = m.find(n.action_name);
            if (eval_condition(a.success, w)) return Status::Success;
            if (eval_condition(a.failure, w)) return Status::Failure;
            for (const auto& [var, val] : a.writes) w.set(var, Value::boolean(val));
            return Status::Running;
        }
        case NodeKind::Sequence:
            for (const TreeNodePtr& c : n.children) {
                if (ref_status(*c, m, w) == Status::Success) continue;
                return ref_tick(*c, m, w);
            }
            return Status::Success;
        case NodeKind::Fallback:
            for (const TreeNodePtr& c : n.children) {
                if (ref_status(*c, m, w) == Status::Failure) continue;
                return ref_tick(*c, m, w);
            }
            return Status::Failure;
        default:
            throw Error("ref evaluator only covers Sequence/Fallback/Condition/Action");
    }
}

// Random trees of composites/conditions/actions over boolean variables
// v0..v{nvars-1}. Each generated tree brings its own RegionAction set and a
// matching engine-side ActionRegistry whose steps also count world writes
// (for the at-most-one-running-action-per-tick assertion).
class TreeGen {
  public:
    TreeGen(std::uint64_t seed, int nvars = 5) : rng_(seed), nvars_(nvars) {}

    struct Generated {
        TreeNodePtr root;
        RefModel model;
        ActionRegistry registry;
        std::shared_ptr<int> writes_this_tick = std::make_shared<int>(0);
    };

    Generated tree(int max_depth) {
        Generated g;
        g.writes_this_tick = std::make_shared<int>(0);
        node_counter_ = 0;
        action_counter_ = 0;
        pending_.clear();
        g.root = gen_node(max_depth);
        g.model.actions = pending_;
        for (const RegionAction& a : pending_) {
            RegionAction copy = a;
            auto counter = g.writes_this_tick;
            g.registry.add(ActionImpl{
                a.name,
                [copy, counter](WorldState& w, const Params&) {
                    if (eval_condition(copy.success, w)) return Status::Success;
                    if (eval_condition(copy.failure, w)) return Status::Failure;
                    for (const auto& [var, val] : copy.writes)
                        w.set(var, Value::boolean(val));
                    ++*counter;
                    return Status::Running;
                },
                nullptr,
            });
        }
        return g;
    }

    WorldState world() {
        WorldState w;
        for (int i = 0; i < nvars_; ++i)
            w.declare(var(i), Value::boolean(coin()));
        return w;
    }

    int irand(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return irand(0, 1) == 1; }

  private:
    std::string var(int i) { return "v" + std::to_string(i); }

    Condition rand_condition(int max_literals) {
        std::vector<Literal> lits;
        int n = irand(1, max_literals);
        for (int i = 0; i < n; ++i) {
            Literal l;
            l.variable = var(irand(0, nvars_ - 1));
            l.op = coin() ? CompareOp::Eq : CompareOp::Ne;
            l.constant = Value::boolean(coin());
            lits.push_back(std::move(l));
        }
        return Condition(std::move(lits));
    }

    TreeNodePtr gen_leaf() {
        std::string id = "n" + std::to_string(node_counter_++);
        if (coin()) return TreeNode::condition(id, rand_condition(2));
        RegionAction a;
        a.name = "a" + std::to_string(action_counter_++);
        a.success = rand_condition(2);
        a.failure = rand_condition(2);
        int writes = irand(1, 2);
        for (int i = 0; i < writes; ++i)
            a.writes.emplace_back(var(irand(0, nvars_ - 1)), coin());
        pending_.push_back(a);
        return TreeNode::action(id, a.name, {});
    }

    TreeNodePtr gen_node(int depth) {
        if (depth <= 0 || irand(0, 3) == 0) return gen_leaf();
        std::string id = "n" + std::to_string(node_counter_++);
        std::vector<TreeNodePtr> children;
        int n = irand(2, 3);
        for (int i = 0; i < n; ++i) children.push_back(gen_node(depth - 1));
        return coin() ? TreeNode::sequence(id, std::move(children))
                      : TreeNode::fallback(id, std::move(children));
    }

    std::mt19937_64 rng_;
    int nvars_;
    int node_counter_ = 0;
    int action_counter_ = 0;
    std::vector<RegionAction> pending_;
};

}  // namespace btweave::testsupport
