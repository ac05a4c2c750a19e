// btweave: validate, plan, run and check .btw skill documents.
//
// Exit codes: 0 success, 1 check failed (topology violation, run ended in
// Failure, protocol finding, FTS violation, unrefined plan), 2 usage or
// parse error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "btweave/backchain.hpp"
#include "btweave/btsync.hpp"
#include "btweave/dsl.hpp"
#include "btweave/errors.hpp"
#include "btweave/executor.hpp"
#include "btweave/plant.hpp"
#include "btweave/runtime.hpp"

using namespace btweave;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw Error("cannot read '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// Registers the simulated plant actions, then inert stubs for anything else
// the document declares, so every action leaf is executable.
ActionRegistry executable_actions(const Document& doc, std::shared_ptr<OperatorPrompt> op) {
    ActionRegistry reg;
    register_plant_actions(reg, std::move(op));
    ActionRegistry stubs = stub_actions(doc);
    for (const ActionDecl& a : doc.actions)
        if (!reg.has(a.name)) reg.add(stubs.find(a.name));
    return reg;
}

Value coerce_like(const Value& old, const std::string& text) {
    switch (old.type()) {
        case ValueType::Bool:
            if (text == "true") return Value::boolean(true);
            if (text == "false") return Value::boolean(false);
            throw Error("expected true/false, got '" + text + "'");
        case ValueType::Int: return Value::integer(std::stoll(text));
        case ValueType::Real: return Value::real(std::stod(text), old.unit());
        case ValueType::String: return Value::string(text);
        case ValueType::Enum: return Value::symbol(text);
    }
    throw Error("unknown value type");
}

const DeploymentDecl& pick_deployment(const Document& doc, const std::string& wanted) {
    if (!wanted.empty()) {
        const DeploymentDecl* d = doc.find_deployment(wanted);
        if (!d) throw Error("no deployment '" + wanted + "' in document");
        return *d;
    }
    if (doc.deployments.empty()) throw Error("document declares no deployment");
    return doc.deployments.front();
}

// --- validate ---------------------------------------------------------------

int cmd_validate(const std::string& file) {
    Document doc = parse_document(slurp(file));
    std::cout << "parse: ok (" << doc.worlds.size() << " worlds, " << doc.skills.size()
              << " skills, " << doc.trees.size() << " trees, " << doc.deployments.size()
              << " deployments)\n";

    int rc = kOk;
    ActionRegistry stubs = stub_actions(doc);
    for (const DeploymentDecl& dd : doc.deployments) {
        try {
            Deployment dep = instantiate_deployment(dd, doc, stubs);
            ValidationReport rep = validate_topology(dep);
            if (rep.ok) {
                std::cout << "deployment '" << dd.name << "': topology ok (root "
                          << rep.root_host << ")\n";
            } else {
                std::cout << "deployment '" << dd.name << "':\n" << rep.to_text();
                rc = kCheckFailed;
            }
        } catch (const Error& e) {
            std::cout << "deployment '" << dd.name << "': " << e.what() << "\n";
            rc = kCheckFailed;
        }
    }

    auto [parent, child] = builtin_roles();
    ConsistencyReport protocol = check_consistency(compose(parent, child));
    std::cout << "protocol: " << (protocol.consistent ? "consistent" : "inconsistent")
              << " (" << protocol.states_explored << " states)\n";
    if (!protocol.consistent) rc = kCheckFailed;
    return rc;
}

// --- plan -------------------------------------------------------------------

int cmd_plan(const std::string& file, const std::string& goal_text, int max_depth) {
    Document doc = parse_document(slurp(file));

    Goal goal;
    if (const GoalDecl* g = doc.find_goal(goal_text)) {
        goal = goal_from(*g);
    } else {
        std::stringstream ss(goal_text);
        std::string part;
        while (std::getline(ss, part, ','))
            goal.conditions.push_back(parse_condition(part));
        if (goal.conditions.empty()) throw Error("empty goal");
    }

    SkillRegistry skills = skills_from(doc);
    ActionRegistry stubs = stub_actions(doc);
    PlanTree plan = backchain(goal, skills, stubs, max_depth);

    std::istringstream prov(plan.provenance_text());
    for (std::string line; std::getline(prov, line);) std::cout << "# " << line << "\n";

    Document out;
    out.actions = doc.actions;
    out.skills = doc.skills;
    out.trees.push_back(TreeDecl{"planned", ast_from_tree(*plan.root), {}});
    std::cout << "\n" << print_document(out);

    if (!plan.unrefined.empty()) {
        std::cerr << "unrefined conditions (no achiever skill):\n";
        for (const Condition& c : plan.unrefined) std::cerr << "  " << c.to_string() << "\n";
        return kCheckFailed;
    }
    return kOk;
}

// --- run --------------------------------------------------------------------

struct Injection {
    std::string host;
    int tick = 0;
};

int cmd_run(const std::string& file, const std::string& deployment,
            const std::string& answers_file, const std::string& mode, std::uint64_t seed,
            int max_ticks, const std::vector<std::string>& sets,
            const std::vector<std::string>& injects) {
    Document doc = parse_document(slurp(file));
    const DeploymentDecl& dd = pick_deployment(doc, deployment);

    std::shared_ptr<OperatorPrompt> op =
        answers_file.empty() ? OperatorPrompt::interactive()
                             : OperatorPrompt::scripted(parse_answers(slurp(answers_file)));
    ActionRegistry actions = executable_actions(doc, op);
    Deployment dep = instantiate_deployment(dd, doc, actions);

    std::vector<std::unique_ptr<AxisPlant>> plants;
    for (HostSpec& h : dep.hosts) {
        plants.push_back(std::make_unique<AxisPlant>());
        h.post_tick = plants.back()->hook();
    }
    auto plant_of = [&](const std::string& host) -> AxisPlant& {
        for (std::size_t i = 0; i < dep.hosts.size(); ++i)
            if (dep.hosts[i].id == host) return *plants[i];
        throw Error("no host '" + host + "' in deployment '" + dd.name + "'");
    };

    for (const std::string& s : injects) {
        auto colon = s.rfind(':');
        if (colon == std::string::npos) throw Error("--inject expects host:tick, got '" + s + "'");
        plant_of(s.substr(0, colon)).inject_error(std::stoi(s.substr(colon + 1)));
    }
    for (const std::string& s : sets) {
        auto dot = s.find('.');
        auto eq = s.find('=', dot == std::string::npos ? 0 : dot);
        if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw Error("--set expects host.var=value, got '" + s + "'");
        const std::string host = s.substr(0, dot);
        const std::string var = s.substr(dot + 1, eq - dot - 1);
        HostSpec* h = dep.find_host(host);
        if (!h) throw Error("no host '" + host + "' in deployment '" + dd.name + "'");
        h->world.set(var, coerce_like(h->world.get(var), s.substr(eq + 1)));
    }

    DeployOptions opts;
    if (mode == "lockstep") opts.mode = RunMode::Lockstep;
    else if (mode == "async") opts.mode = RunMode::Async;
    else throw Error("--mode expects lockstep or async, got '" + mode + "'");
    opts.max_ticks = max_ticks;
    opts.seed = seed;
    opts.stop_on_failure = false;

    DeployResult r = run_deployment(dep, opts);

    std::cout << r.trace.to_text();
    std::cout << "status=" << to_char(r.status) << " ticks=" << r.ticks << "\n";
    for (const auto& [host, world] : r.final_worlds)
        std::cerr << host << ": " << world.to_string() << "\n";
    return r.status == Status::Success ? kOk : kCheckFailed;
}

// --- check-protocol ---------------------------------------------------------

int cmd_check_protocol(const std::string& roles_file) {
    RoleAutomaton parent, child;
    if (roles_file.empty()) {
        std::tie(parent, child) = builtin_roles();
    } else {
        std::vector<RoleAutomaton> roles = parse_roles(slurp(roles_file));
        if (roles.size() != 2)
            throw Error("role file must define exactly two roles (parent, child), got " +
                        std::to_string(roles.size()));
        parent = std::move(roles[0]);
        child = std::move(roles[1]);
    }

    ConsistencyReport rep = check_consistency(compose(parent, child));
    std::cout << rep.to_text();
    return rep.consistent ? kOk : kCheckFailed;
}

// --- fts --------------------------------------------------------------------

int cmd_fts(const std::string& file, const std::string& tree, const std::string& world,
            int bound, const std::string& grid) {
    Document doc = parse_document(slurp(file));
    const TreeDecl* td = doc.find_tree(tree);
    if (!td) throw Error("no tree '" + tree + "' in document");

    const WorldDecl* wd = nullptr;
    if (!world.empty()) {
        wd = doc.find_world(world);
        if (!wd) throw Error("no world '" + world + "' in document");
    } else if (doc.worlds.size() == 1) {
        wd = &doc.worlds.front();
    } else {
        throw Error("document declares " + std::to_string(doc.worlds.size()) +
                    " worlds; pick one with --world");
    }

    std::vector<WorldState> states;
    states.push_back(instantiate_world(*wd));
    if (!grid.empty()) {
        std::stringstream ss(grid);
        std::string axis;
        while (std::getline(ss, axis, ',')) {
            std::vector<Value> values;
            auto eq = axis.find('=');
            const std::string var = axis.substr(0, eq);
            const Value& base = states.front().get(var);  // UnknownVariableError
            if (eq == std::string::npos) {
                if (base.type() != ValueType::Bool)
                    throw Error("grid axis '" + var + "' without a range needs a bool variable");
                values = {Value::boolean(false), Value::boolean(true)};
            } else {
                const std::string range = axis.substr(eq + 1);
                auto dots = range.find("..");
                if (dots == std::string::npos)
                    throw Error("grid axis '" + axis + "': expected lo..hi");
                const long lo = std::stol(range.substr(0, dots));
                const long hi = std::stol(range.substr(dots + 2));
                if (hi < lo) throw Error("grid axis '" + axis + "': hi < lo");
                for (long v = lo; v <= hi; ++v)
                    values.push_back(base.type() == ValueType::Int
                                         ? Value::integer(v)
                                         : Value::real(static_cast<double>(v), base.unit()));
            }
            std::vector<WorldState> expanded;
            for (const WorldState& s : states)
                for (const Value& v : values) {
                    WorldState e = s;
                    e.set(var, v);
                    expanded.push_back(std::move(e));
                }
            states = std::move(expanded);
        }
    }

    ActionRegistry actions = executable_actions(doc, OperatorPrompt::scripted({}));
    TreeNodePtr root = instantiate_tree(*td, doc, actions);
    AxisPlant plant;
    FtsReport rep = check_fts(*root, actions, states, bound, plant.hook());
    std::cout << rep.to_text();
    return rep.holds ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"btweave skill-tree toolkit"};
    app.require_subcommand(1);

    std::string file, deployment, answers, goal, roles_file, tree, world;
    std::string mode = "lockstep";
    std::uint64_t seed = 1;
    int max_ticks = 200, max_depth = 8, bound = 60;
    std::vector<std::string> sets, injects;
    std::string grid;

    CLI::App* validate = app.add_subcommand("validate", "parse a document and check its deployments");
    validate->add_option("file", file, "a .btw document")->required();

    CLI::App* plan = app.add_subcommand("plan", "backchain a goal into a skill tree");
    plan->add_option("file", file, "a .btw document")->required();
    plan->add_option("goal", goal, "goal name, or comma-separated conditions")->required();
    plan->add_option("--max-depth", max_depth, "refinement depth limit");

    CLI::App* run = app.add_subcommand("run", "execute a deployment");
    run->add_option("file", file, "a .btw document")->required();
    run->add_option("--deployment", deployment, "deployment name (default: first)");
    run->add_option("--answers", answers, "operator answers, one per line (default: prompt)");
    run->add_option("--mode", mode, "lockstep | async");
    run->add_option("--seed", seed, "async event timing seed");
    run->add_option("--max-ticks", max_ticks, "tick budget");
    run->add_option("--set", sets, "host.var=value applied before the run")->take_all();
    run->add_option("--inject", injects, "host:tick drive fault injection")->take_all();

    CLI::App* proto = app.add_subcommand("check-protocol", "check role automata for deadlocks and livelocks");
    proto->add_option("roles", roles_file, "role definition file (default: builtin pair)");

    CLI::App* fts = app.add_subcommand("fts", "certify finite-time success over a state grid");
    fts->add_option("file", file, "a .btw document")->required();
    fts->add_option("--tree", tree, "tree to certify")->required();
    fts->add_option("--world", world, "initial world (default: the only one)");
    fts->add_option("--bound", bound, "tick bound per state");
    fts->add_option("--grid", grid, "axes, e.g. pos=0..20,power,error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*validate) return cmd_validate(file);
        if (*plan) return cmd_plan(file, goal, max_depth);
        if (*run) return cmd_run(file, deployment, answers, mode, seed, max_ticks, sets, injects);
        if (*proto) return cmd_check_protocol(roles_file);
        if (*fts) return cmd_fts(file, tree, world, bound, grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
