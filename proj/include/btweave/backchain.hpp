#pragma once

#include <map>
#include <string>
#include <vector>

#include "btweave/skills.hpp"

namespace btweave {

// An ordered list of conditions to achieve; leftmost has the highest
// priority and ends up leftmost in the generated tree.
struct Goal {
    std::vector<Condition> conditions;
};

// Result of backchaining: the composed tree plus provenance for audit.
struct PlanTree {
    TreeNodePtr root;

    struct Refinement {
        Condition condition;  // what this subtree achieves
        std::string skill;
    };
    // keyed by the root node id of each inserted achiever subtree
    std::map<std::string, Refinement> provenance;
    // conditions left as bare leaves (no achiever, or cycle-pruned)
    std::vector<Condition> unrefined;
    int depth_used = 0;

    std::string provenance_text() const;
};

inline constexpr int kDefaultMaxDepth = 8;

// Composes a tree for the goal: Sequence over the goal conditions, each
// condition replaced by Fallback(Cond, achiever-BT...) when achievers exist,
// recursing into achiever preconditions. A (condition, skill) pair is never
// reused on one branch (cycle prevention); refinement past max_depth throws
// DepthExceededError. Unachievable conditions stay as bare leaves.
PlanTree backchain(const Goal& goal, const SkillRegistry& reg, const ActionRegistry& actions,
                   int max_depth = kDefaultMaxDepth);

// The lookup-decorator pattern: replaces the precondition leaf of an
// expand_skill tree with Fallback(C_pre, Lookup(wanted = C_pre)). Achievers
// registered now are bound statically (as the lookup's child); otherwise the
// lookup resolves at first tick through the executor's resolver hook.
TreeNodePtr refine_precondition(TreeNodePtr skill_tree, const SkillRegistry& reg,
                                const ActionRegistry& actions);

// Builds the subtree a lookup adopts for `wanted`: the achiever expansion
// (several achievers compose by fallback), or nullptr when none match.
// `id_prefix` must be unique within the adopting tree.
TreeNodePtr build_lookup_subtree(const Condition& wanted, const SkillRegistry& reg,
                                 const ActionRegistry& actions, const std::string& id_prefix);

}  // namespace btweave
