#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "btweave/bt.hpp"
#include "btweave/condition.hpp"

namespace btweave {

// The skill tuple: an executable function wrapped in its applicability
// contract. priority orders competing achievers (higher wins).
struct Skill {
    std::string name;
    Condition pre;   // checked once per activation
    Condition inv;   // re-checked every tick while the action runs
    Condition post;  // the skill's goal; also its success short-circuit
    std::string action;
    int priority = 0;
};

enum class ParamDir { In, Out };

struct ParamSpec {
    std::string name;
    ValueType type = ValueType::Real;
    ParamDir dir = ParamDir::In;

    bool operator==(const ParamSpec&) const = default;
};

// How a skill's parameters map onto world variables. The protocol role of
// every skill is the one builtin child role (one protocol suffices when all
// nodes share one interface), so it is not stored per skill.
struct SkillInterface {
    std::vector<ParamSpec> params;
    std::map<std::string, std::string> mapping;  // param name -> world variable

    const ParamSpec* find_param(const std::string& name) const;
};

// Copies bound in-params into their mapped world variables; called once at
// activation, before the action's first step.
void apply_mapping(const SkillInterface& si, const Params& bindings, WorldState& w);

// Reads mapped out-params back from the world (valid once the skill
// succeeded).
Params extract_outputs(const SkillInterface& si, const WorldState& w);

class SkillRegistry {
  public:
    // Throws DuplicateSkillError, UnsatisfiablePostError, InterfaceError.
    void register_skill(Skill s, SkillInterface si = {});

    bool has(const std::string& name) const;
    const Skill& find(const std::string& name) const;           // Error if absent
    const SkillInterface& interface_of(const std::string& name) const;
    std::size_t size() const { return order_.size(); }
    const std::vector<std::string>& names() const { return order_; }  // registration order

    // All skills whose postcondition implies the goal, highest priority
    // first, ties in registration order.
    std::vector<const Skill*> find_achievers(const Condition& goal) const;

  private:
    std::map<std::string, std::pair<Skill, SkillInterface>> skills_;
    std::vector<std::string> order_;
};

// Canonical skill-as-BT expansion:
//   Fallback(Cond(post), SequenceMem(Cond(pre), Sequence(Cond(inv), Action)))
// The memory node makes pre a one-shot check per activation while inv stays
// reactive. Node ids derive from id_prefix (default: the skill name), so
// callers expanding one skill several times must pass distinct prefixes.
// Throws UnboundActionError, MissingParamError.
TreeNodePtr expand_skill(const Skill& s, const SkillInterface& si, const Params& bindings,
                         const ActionRegistry& actions, const std::string& id_prefix = "");

}  // namespace btweave
