#include "btweave/backchain.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "btweave/errors.hpp"

namespace btweave {

namespace {

struct Planner {
    const SkillRegistry& reg;
    const ActionRegistry& actions;
    int max_depth;
    PlanTree& out;
    int counter = 0;
    std::set<std::string> unrefined_seen;
    // (condition text, skill name) pairs on the current branch
    std::vector<std::pair<std::string, std::string>> ancestors;

    std::string fresh(const std::string& base) {
        return base + "#" + std::to_string(counter++);
    }

    void note_unrefined(const Condition& c) {
        if (unrefined_seen.insert(c.to_string()).second) out.unrefined.push_back(c);
    }

    TreeNodePtr refine(const Condition& c, int depth) {
        // the empty conjunction is trivially true: nothing to achieve
        if (c.empty()) return TreeNode::condition(fresh("c"), c);
        const std::string key = c.to_string();
        std::vector<const Skill*> achievers = reg.find_achievers(c);
        std::vector<const Skill*> usable;
        for (const Skill* s : achievers) {
            auto pair = std::make_pair(key, s->name);
            if (std::find(ancestors.begin(), ancestors.end(), pair) == ancestors.end())
                usable.push_back(s);
        }
        if (usable.empty()) {
            // unachievable (or every achiever would close a cycle): leave the
            // bare condition in place
            note_unrefined(c);
            return TreeNode::condition(fresh("c"), c);
        }
        if (depth <= 0)
            throw DepthExceededError("refining '" + key + "' exceeds the depth budget");
        out.depth_used = std::max(out.depth_used, max_depth - depth + 1);

        std::vector<TreeNodePtr> kids;
        kids.push_back(TreeNode::condition(fresh("c"), c));
        for (const Skill* s : usable) {
            const std::string px = fresh(s->name);
            TreeNodePtr bt =
                expand_skill(*s, reg.interface_of(s->name), {}, actions, px);
            // recurse into the achiever's precondition leaf
            ancestors.emplace_back(key, s->name);
            TreeNodePtr refined_pre = refine(s->pre, depth - 1);
            ancestors.pop_back();
            bt->children[1]->children[0] = std::move(refined_pre);
            out.provenance.emplace(px, PlanTree::Refinement{c, s->name});
            kids.push_back(std::move(bt));
        }
        return TreeNode::fallback(fresh("fb"), std::move(kids));
    }
};

}  // namespace

PlanTree backchain(const Goal& goal, const SkillRegistry& reg, const ActionRegistry& actions,
                   int max_depth) {
    if (goal.conditions.empty()) throw Error("goal must contain at least one condition");
    if (max_depth < 1) throw Error("max_depth must be >= 1");

    PlanTree plan;
    Planner planner{reg, actions, max_depth, plan, 0, {}, {}};
    std::vector<TreeNodePtr> kids;
    for (const Condition& c : goal.conditions)
        kids.push_back(planner.refine(c, max_depth));
    plan.root = TreeNode::sequence("goal", std::move(kids));
    plan.root->validate();
    return plan;
}

std::string PlanTree::provenance_text() const {
    std::string out;
    for (const auto& [id, r] : provenance)
        out += "refined: [" + r.condition.to_string() + "] <- skill " + r.skill + " (" + id +
               ")\n";
    for (const Condition& c : unrefined) out += "unrefined: [" + c.to_string() + "]\n";
    out += "depth_used: " + std::to_string(depth_used) + "\n";
    return out;
}

TreeNodePtr build_lookup_subtree(const Condition& wanted, const SkillRegistry& reg,
                                 const ActionRegistry& actions,
                                 const std::string& id_prefix) {
    std::vector<const Skill*> achievers = reg.find_achievers(wanted);
    if (achievers.empty()) return nullptr;
    std::vector<TreeNodePtr> kids;
    int i = 0;
    for (const Skill* s : achievers)
        kids.push_back(expand_skill(*s, reg.interface_of(s->name), {}, actions,
                                    id_prefix + ".a" + std::to_string(i++) + "." + s->name));
    if (kids.size() == 1) return std::move(kids.front());
    return TreeNode::fallback(id_prefix + ".alts", std::move(kids));
}

TreeNodePtr refine_precondition(TreeNodePtr skill_tree, const SkillRegistry& reg,
                                const ActionRegistry& actions) {
    if (!skill_tree || skill_tree->kind != NodeKind::Fallback ||
        skill_tree->children.size() != 2 ||
        skill_tree->children[1]->kind != NodeKind::SequenceMem ||
        skill_tree->children[1]->children.size() != 2 ||
        skill_tree->children[1]->children[0]->kind != NodeKind::Condition)
        throw Error("refine_precondition expects an expand_skill tree");

    TreeNodePtr& pre_slot = skill_tree->children[1]->children[0];
    Condition pre = pre_slot->cond;
    const std::string pre_id = pre_slot->id;

    TreeNodePtr lookup = TreeNode::lookup(pre_id + ".lookup", pre);
    TreeNodePtr bound = build_lookup_subtree(pre, reg, actions, pre_id + ".lookup");
    if (bound) lookup->children.push_back(std::move(bound));

    std::vector<TreeNodePtr> kids;
    kids.push_back(TreeNode::condition(pre_id, pre));
    kids.push_back(std::move(lookup));
    pre_slot = TreeNode::fallback(pre_id + ".fb", std::move(kids));
    return skill_tree;
}

}  // namespace btweave
