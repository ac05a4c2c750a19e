#pragma once

#include <string>
#include <vector>

#include "btweave/backchain.hpp"
#include "btweave/bt.hpp"
#include "btweave/condition.hpp"
#include "btweave/runtime.hpp"
#include "btweave/skills.hpp"
#include "btweave/world_state.hpp"

namespace btweave {

// ---------------------------------------------------------------------------
// .btw document AST
//
// A document declares worlds, action stubs, skills, trees, goals and
// deployments. It is position-annotated for diagnostics; equality is
// structural (positions ignored) so parse(print(doc)) == doc.
// ---------------------------------------------------------------------------

struct SourcePos {
    int line = 0, col = 0;  // 1-based; 0 = synthesized (not from a file)

    std::string to_string() const {
        return std::to_string(line) + ":" + std::to_string(col);
    }
};

struct VarDecl {
    std::string name;
    ValueType type = ValueType::Real;
    std::string unit;  // reals only
    Value init;
    SourcePos pos;

    bool operator==(const VarDecl& o) const {
        return name == o.name && type == o.type && unit == o.unit && init == o.init;
    }
};

struct WorldDecl {
    std::string name;
    std::vector<VarDecl> vars;
    SourcePos pos;

    bool operator==(const WorldDecl& o) const { return name == o.name && vars == o.vars; }
};

// An action stub: the name and parameter signature of an executable function
// the runtime is expected to provide.
struct ActionDecl {
    std::string name;
    std::vector<ParamSpec> params;
    SourcePos pos;

    bool operator==(const ActionDecl& o) const {
        return name == o.name && params == o.params;
    }
};

struct SkillParamDecl {
    ParamSpec spec;
    std::string maps_to;  // world variable; defaults to the param name
    SourcePos pos;

    bool operator==(const SkillParamDecl& o) const {
        return spec == o.spec && maps_to == o.maps_to;
    }
};

struct SkillDecl {
    std::string name;
    Condition pre, inv, post;
    std::string action;
    int priority = 0;
    std::vector<SkillParamDecl> params;
    SourcePos pos;

    bool operator==(const SkillDecl& o) const {
        return name == o.name && pre == o.pre && inv == o.inv && post == o.post &&
               action == o.action && priority == o.priority && params == o.params;
    }
};

struct NodeAst {
    enum class Kind { Fallback, Sequence, SequenceMem, Cond, SkillRef, ActionRef, Lookup,
                      Remote };

    Kind kind = Kind::Cond;
    std::string label;  // optional `as <ident>`; becomes the node id
    std::vector<NodeAst> children;
    Condition cond;            // Cond; Lookup wanted post
    std::string name;          // skill/action name; remote host
    std::string remote_tree;   // remote only
    Params bindings;           // skill/action refs
    SourcePos pos;

    bool operator==(const NodeAst& o) const {
        return kind == o.kind && label == o.label && children == o.children &&
               cond == o.cond && name == o.name && remote_tree == o.remote_tree &&
               bindings == o.bindings;
    }
};

struct TreeDecl {
    std::string name;
    NodeAst root;
    SourcePos pos;

    bool operator==(const TreeDecl& o) const { return name == o.name && root == o.root; }
};

struct GoalDecl {
    std::string name;
    std::vector<Condition> conditions;
    SourcePos pos;

    bool operator==(const GoalDecl& o) const {
        return name == o.name && conditions == o.conditions;
    }
};

struct PortDecl {
    DataPortSpec spec;  // spec.node may be a dotted path into a skill expansion
    SourcePos pos;

    bool operator==(const PortDecl& o) const { return spec == o.spec; }
};

struct HostDecl {
    std::string id;
    std::string tree;   // a TreeDecl name
    std::string world;  // a WorldDecl name
    std::vector<PortDecl> ports;
    SourcePos pos;

    bool operator==(const HostDecl& o) const {
        return id == o.id && tree == o.tree && world == o.world && ports == o.ports;
    }
};

struct LinkDecl {
    DataLink link;
    SourcePos pos;

    bool operator==(const LinkDecl& o) const { return link == o.link; }
};

struct DeploymentDecl {
    std::string name;
    std::vector<HostDecl> hosts;
    std::vector<LinkDecl> links;
    SourcePos pos;

    bool operator==(const DeploymentDecl& o) const {
        return name == o.name && hosts == o.hosts && links == o.links;
    }
};

struct Document {
    std::vector<WorldDecl> worlds;
    std::vector<ActionDecl> actions;
    std::vector<SkillDecl> skills;
    std::vector<TreeDecl> trees;
    std::vector<GoalDecl> goals;
    std::vector<DeploymentDecl> deployments;

    const WorldDecl* find_world(const std::string& name) const;
    const TreeDecl* find_tree(const std::string& name) const;
    const GoalDecl* find_goal(const std::string& name) const;
    const DeploymentDecl* find_deployment(const std::string& name) const;

    bool operator==(const Document& o) const {
        return worlds == o.worlds && actions == o.actions && skills == o.skills &&
               trees == o.trees && goals == o.goals && deployments == o.deployments;
    }
};

// ---------------------------------------------------------------------------
// Parse / print
// ---------------------------------------------------------------------------

// Parses a .btw document. Conditions inside quoted strings are sub-parsed by
// the condition grammar; their errors are rethrown as SyntaxError at the
// file position of the offending character. After parsing, cross-references
// (skill -> action, tree -> skill/action, deployment -> tree/world/host) are
// checked and collected into one ResolutionError.
Document parse_document(const std::string& text);

// Canonical formatting; stable across runs, parse(print(doc)) == doc.
std::string print_document(const Document& doc);

// ---------------------------------------------------------------------------
// Instantiation into engine objects
// ---------------------------------------------------------------------------

WorldState instantiate_world(const WorldDecl& w);

// All declared skills, with their interfaces, in declaration order.
SkillRegistry skills_from(const Document& doc);

// Inert implementations (Running forever, no writes) for every declared
// action stub — enough for structural validation and planning.
ActionRegistry stub_actions(const Document& doc);

Goal goal_from(const GoalDecl& g);

// Builds the executable tree: skill refs expand through expand_skill, lookup
// leaves statically adopt an achiever subtree when the document's skills
// provide one. Node ids are the `as` labels where given, otherwise generated
// deterministically in pre-order ("<kind>#<n>").
TreeNodePtr instantiate_tree(const TreeDecl& t, const Document& doc,
                             const ActionRegistry& actions);

// Hosts get instantiated worlds and trees and share one action registry.
Deployment instantiate_deployment(const DeploymentDecl& dep, const Document& doc,
                                  const ActionRegistry& actions);

// Inverse of instantiate_tree's shape (ids are not preserved — they regrow
// deterministically on the next instantiation). Skill expansions reappear as
// their raw composite structure; a lookup's adopted child is dropped (it
// re-binds from the document's skills). Used to emit planner output as DSL.
NodeAst ast_from_tree(const TreeNode& n);

}  // namespace btweave
