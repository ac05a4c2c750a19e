#include "btweave/skills.hpp"

#include <algorithm>
#include <set>

#include "btweave/errors.hpp"
#include "btweave/world_state.hpp"

namespace btweave {

const ParamSpec* SkillInterface::find_param(const std::string& name) const {
    for (const ParamSpec& p : params)
        if (p.name == name) return &p;
    return nullptr;
}

void apply_mapping(const SkillInterface& si, const Params& bindings, WorldState& w) {
    for (const ParamSpec& p : si.params) {
        if (p.dir != ParamDir::In) continue;
        auto mapped = si.mapping.find(p.name);
        if (mapped == si.mapping.end()) continue;
        auto bound = bindings.find(p.name);
        if (bound == bindings.end()) throw MissingParamError(p.name);
        w.set(mapped->second, bound->second);
    }
}

Params extract_outputs(const SkillInterface& si, const WorldState& w) {
    Params out;
    for (const ParamSpec& p : si.params) {
        if (p.dir != ParamDir::Out) continue;
        auto mapped = si.mapping.find(p.name);
        if (mapped == si.mapping.end()) continue;
        out.emplace(p.name, w.get(mapped->second));
    }
    return out;
}

namespace {

void validate_interface(const SkillInterface& si) {
    std::set<std::string> names;
    for (const ParamSpec& p : si.params)
        if (!names.insert(p.name).second)
            throw InterfaceError("duplicate parameter '" + p.name + "'");
    std::set<std::string> targets;
    for (const auto& [param, var] : si.mapping) {
        if (!names.count(param))
            throw InterfaceError("mapping references unknown parameter '" + param + "'");
        if (!targets.insert(var).second)
            throw InterfaceError("mapping is not injective: variable '" + var +
                                 "' mapped twice");
    }
}

}  // namespace

void SkillRegistry::register_skill(Skill s, SkillInterface si) {
    if (skills_.count(s.name)) throw DuplicateSkillError(s.name);
    if (!satisfiable(s.post)) throw UnsatisfiablePostError(s.name);
    validate_interface(si);
    order_.push_back(s.name);
    std::string name = s.name;
    skills_.emplace(std::move(name), std::make_pair(std::move(s), std::move(si)));
}

bool SkillRegistry::has(const std::string& name) const { return skills_.count(name) > 0; }

const Skill& SkillRegistry::find(const std::string& name) const {
    auto it = skills_.find(name);
    if (it == skills_.end()) throw Error("no skill '" + name + "'");
    return it->second.first;
}

const SkillInterface& SkillRegistry::interface_of(const std::string& name) const {
    auto it = skills_.find(name);
    if (it == skills_.end()) throw Error("no skill '" + name + "'");
    return it->second.second;
}

std::vector<const Skill*> SkillRegistry::find_achievers(const Condition& goal) const {
    std::vector<const Skill*> out;
    for (const std::string& name : order_) {
        const Skill& s = skills_.at(name).first;
        if (implies(s.post, goal)) out.push_back(&s);
    }
    // stable: ties keep registration order
    std::stable_sort(out.begin(), out.end(),
                     [](const Skill* a, const Skill* b) { return a->priority > b->priority; });
    return out;
}

TreeNodePtr expand_skill(const Skill& s, const SkillInterface& si, const Params& bindings,
                         const ActionRegistry& actions, const std::string& id_prefix) {
    if (!actions.has(s.action)) throw UnboundActionError(s.action);
    for (const ParamSpec& p : si.params)
        if (p.dir == ParamDir::In && !bindings.count(p.name)) throw MissingParamError(p.name);

    const std::string px = id_prefix.empty() ? s.name : id_prefix;
    std::vector<TreeNodePtr> inner;
    inner.push_back(TreeNode::condition(px + ".inv", s.inv));
    inner.push_back(TreeNode::action(px + ".act", s.action, bindings));
    std::vector<TreeNodePtr> mem;
    mem.push_back(TreeNode::condition(px + ".pre", s.pre));
    mem.push_back(TreeNode::sequence(px + ".seq", std::move(inner)));
    std::vector<TreeNodePtr> top;
    top.push_back(TreeNode::condition(px + ".post", s.post));
    top.push_back(TreeNode::sequence_mem(px + ".mem", std::move(mem)));
    return TreeNode::fallback(px, std::move(top));
}

}  // namespace btweave
