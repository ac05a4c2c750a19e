#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

#include "btweave/btsync.hpp"
#include "btweave/errors.hpp"

// Bounded model check of internal composition: a coordinator BT drives one
// protocol link per leaf (the coordinator holds the builtin parent endpoint;
// the supplied role is the child side). Child replies are nondeterministic,
// which makes one coordinator tick a branching step; the reachable
// configuration graph is then checked for configurations that can no longer
// reach a quiescent session end (root settled, every link in its acceptance
// condition).

namespace btweave {

namespace {

struct LinkModel {
    const RoleAutomaton* child = nullptr;
    std::vector<std::string> pnames, cnames;  // state index <-> name
    std::map<std::string, int> pindex, cindex;
};

struct Shape {
    std::vector<const TreeNode*> nodes;  // DFS order
    std::map<const TreeNode*, int> index;
    std::vector<const TreeNode*> leaves;  // role-driven leaves, DFS order
    std::map<const TreeNode*, int> leaf_link;
};

void collect_shape(const TreeNode& n, Shape& sh) {
    sh.index[&n] = static_cast<int>(sh.nodes.size());
    sh.nodes.push_back(&n);
    switch (n.kind) {
        case NodeKind::Sequence:
        case NodeKind::Fallback:
        case NodeKind::SequenceMem:
            for (const auto& c : n.children) collect_shape(*c, sh);
            break;
        case NodeKind::Condition:
            break;
        case NodeKind::Action:
        case NodeKind::Remote:
            sh.leaf_link[&n] = static_cast<int>(sh.leaves.size());
            sh.leaves.push_back(&n);
            break;
        default:
            throw Error("internal composition: node '" + n.id +
                        "' has a kind the coordinator check does not model");
    }
}

struct Cfg {
    std::vector<int> mem, runch;   // per node
    std::vector<int> ps, cs;       // per link
    std::vector<char> running;     // per link

    bool operator<(const Cfg& o) const {
        return std::tie(mem, runch, ps, cs, running) <
               std::tie(o.mem, o.runch, o.ps, o.cs, o.running);
    }
};

struct Branch {
    Cfg cfg;
    Status st = Status::Running;
    std::vector<std::string> steps;
};

struct Sim {
    const Shape* shape = nullptr;
    const RoleAutomaton* parent = nullptr;  // builtin parent endpoint, shared
    std::vector<LinkModel> links;
    bool halt_preempted = true;

    // findings discovered while expanding (missing role transitions); the
    // offending branch is not explored further
    std::vector<Finding> stuck;
    std::vector<std::string> base_path;  // tick log of the config being expanded

    void report_stuck(const std::vector<std::string>& steps, const std::string& detail) {
        for (const auto& f : stuck)
            if (f.detail == detail) return;  // first (shortest) witness wins
        Finding f;
        f.kind = FindingKind::Deadlock;
        f.state = detail;
        f.witness = base_path;
        f.witness.insert(f.witness.end(), steps.begin(), steps.end());
        f.detail = detail;
        stuck.push_back(std::move(f));
    }

    const RoleAutomaton::Transition* find_tr(const RoleAutomaton& r, const std::string& st,
                                             RoleAutomaton::Dir dir,
                                             const std::string& msg) const {
        for (const auto& t : r.states.at(st))
            if (t.dir == dir && t.msg == msg) return &t;
        return nullptr;
    }

    // drive one TICK request/reply handshake on link li
    std::vector<Branch> tick_leaf(int li, const Cfg& cfg, std::vector<std::string> steps,
                                  const std::string& leaf_id) {
        std::vector<Branch> out;
        const LinkModel& lm = links[static_cast<std::size_t>(li)];
        const std::string pst = lm.pnames[static_cast<std::size_t>(cfg.ps[li])];
        const std::string cst = lm.cnames[static_cast<std::size_t>(cfg.cs[li])];

        const auto* ptick = find_tr(*parent, pst, RoleAutomaton::Dir::Output, "TICK");
        if (!ptick) {
            report_stuck(steps, "parent endpoint of '" + leaf_id +
                                    "' cannot emit TICK from state " + pst);
            return out;
        }
        const auto* crecv = find_tr(*lm.child, cst, RoleAutomaton::Dir::Input, "TICK");
        if (!crecv) {
            report_stuck(steps, "child role '" + lm.child->name + "' of '" + leaf_id +
                                    "' cannot consume TICK in state " + cst);
            return out;
        }
        bool replied = false;
        for (const auto& t : lm.child->states.at(crecv->to)) {
            if (t.dir != RoleAutomaton::Dir::Output) continue;
            replied = true;
            const auto* pcons = find_tr(*parent, ptick->to, RoleAutomaton::Dir::Input, t.msg);
            if (!pcons) {
                report_stuck(steps, "parent endpoint of '" + leaf_id +
                                        "' cannot consume reply " + t.msg + " in state " +
                                        ptick->to);
                continue;
            }
            Branch b;
            b.cfg = cfg;
            b.cfg.ps[li] = lm.pindex.at(pcons->to);
            b.cfg.cs[li] = lm.cindex.at(t.to);
            if (t.msg == "STATUS_R") {
                b.st = Status::Running;
            } else if (t.msg == "STATUS_S") {
                b.st = Status::Success;
            } else if (t.msg == "STATUS_F") {
                b.st = Status::Failure;
            } else {
                report_stuck(steps, "child role '" + lm.child->name + "' of '" + leaf_id +
                                        "' answers a tick with " + t.msg);
                continue;
            }
            b.cfg.running[li] = (b.st == Status::Running) ? 1 : 0;
            b.steps = steps;
            b.steps.push_back(leaf_id + "=" + std::string(1, to_char(b.st)));
            out.push_back(std::move(b));
        }
        if (!replied)
            report_stuck(steps, "child role '" + lm.child->name + "' of '" + leaf_id +
                                    "' never replies to a tick (state " + crecv->to + ")");
        return out;
    }

    // drive one HALT handshake; returns post-halt configurations
    std::vector<std::pair<Cfg, std::vector<std::string>>> halt_leaf(
        int li, const Cfg& cfg, std::vector<std::string> steps, const std::string& leaf_id) {
        std::vector<std::pair<Cfg, std::vector<std::string>>> out;
        if (!cfg.running[li]) {
            out.emplace_back(cfg, std::move(steps));
            return out;
        }
        if (!halt_preempted) {
            // modeled defect: the coordinator abandons the running leaf
            out.emplace_back(cfg, std::move(steps));
            return out;
        }
        const LinkModel& lm = links[static_cast<std::size_t>(li)];
        const std::string pst = lm.pnames[static_cast<std::size_t>(cfg.ps[li])];
        const std::string cst = lm.cnames[static_cast<std::size_t>(cfg.cs[li])];
        const auto* phalt = find_tr(*parent, pst, RoleAutomaton::Dir::Output, "HALT");
        if (!phalt) {
            report_stuck(steps, "parent endpoint of '" + leaf_id +
                                    "' cannot emit HALT from state " + pst);
            return out;
        }
        const auto* crecv = find_tr(*lm.child, cst, RoleAutomaton::Dir::Input, "HALT");
        if (!crecv) {
            report_stuck(steps, "child role '" + lm.child->name + "' of '" + leaf_id +
                                    "' cannot consume HALT in state " + cst);
            return out;
        }
        bool acked = false;
        for (const auto& t : lm.child->states.at(crecv->to)) {
            if (t.dir != RoleAutomaton::Dir::Output) continue;
            acked = true;
            const auto* pcons = find_tr(*parent, phalt->to, RoleAutomaton::Dir::Input, t.msg);
            if (!pcons) {
                report_stuck(steps, "parent endpoint of '" + leaf_id +
                                        "' cannot consume halt reply " + t.msg +
                                        " in state " + phalt->to);
                continue;
            }
            Cfg next = cfg;
            next.ps[li] = lm.pindex.at(pcons->to);
            next.cs[li] = lm.cindex.at(t.to);
            next.running[li] = 0;
            auto s2 = steps;
            s2.push_back("halt " + leaf_id);
            out.emplace_back(std::move(next), std::move(s2));
        }
        if (!acked)
            report_stuck(steps, "child role '" + lm.child->name + "' of '" + leaf_id +
                                    "' never acknowledges a halt (state " + crecv->to + ")");
        return out;
    }

    std::vector<std::pair<Cfg, std::vector<std::string>>> halt_subtree(
        const TreeNode& n, const Cfg& cfg, std::vector<std::string> steps) {
        switch (n.kind) {
            case NodeKind::Action:
            case NodeKind::Remote:
                return halt_leaf(shape->leaf_link.at(&n), cfg, std::move(steps), n.id);
            case NodeKind::Condition: {
                std::vector<std::pair<Cfg, std::vector<std::string>>> out;
                out.emplace_back(cfg, std::move(steps));
                return out;
            }
            default:
                break;
        }
        std::vector<std::pair<Cfg, std::vector<std::string>>> cur;
        cur.emplace_back(cfg, std::move(steps));
        for (const auto& c : n.children) {
            std::vector<std::pair<Cfg, std::vector<std::string>>> next;
            for (auto& [cf, st] : cur) {
                auto sub = halt_subtree(*c, cf, st);
                next.insert(next.end(), std::make_move_iterator(sub.begin()),
                            std::make_move_iterator(sub.end()));
            }
            cur = std::move(next);
        }
        const int idx = shape->index.at(&n);
        for (auto& [cf, st] : cur) {
            cf.mem[idx] = 0;
            cf.runch[idx] = -1;
        }
        return cur;
    }

    std::vector<Branch> tick_node(const TreeNode& n, const Cfg& cfg,
                                  std::vector<std::string> steps) {
        switch (n.kind) {
            case NodeKind::Condition: {
                std::vector<Branch> out;
                for (Status s : {Status::Success, Status::Failure}) {
                    Branch b;
                    b.cfg = cfg;
                    b.st = s;
                    b.steps = steps;
                    b.steps.push_back(n.id + "=" + std::string(1, to_char(s)));
                    out.push_back(std::move(b));
                }
                return out;
            }
            case NodeKind::Action:
            case NodeKind::Remote:
                return tick_leaf(shape->leaf_link.at(&n), cfg, std::move(steps), n.id);
            case NodeKind::Sequence:
            case NodeKind::Fallback: {
                std::vector<Branch> out;
                composite_step(n, 0, cfg, std::move(steps), out);
                return out;
            }
            case NodeKind::SequenceMem: {
                std::vector<Branch> out;
                mem_step(n, static_cast<std::size_t>(cfg.mem[shape->index.at(&n)]), cfg,
                         std::move(steps), out);
                return out;
            }
            default:
                throw Error("internal composition: unsupported node kind");
        }
    }

    void composite_step(const TreeNode& n, std::size_t i, const Cfg& cfg,
                        std::vector<std::string> steps, std::vector<Branch>& out) {
        const Status pass =
            n.kind == NodeKind::Sequence ? Status::Success : Status::Failure;
        if (i == n.children.size()) {
            settle_composite(n, cfg, pass, -1, std::move(steps), out);
            return;
        }
        for (Branch& b : tick_node(*n.children[i], cfg, steps)) {
            if (b.st == pass) {
                composite_step(n, i + 1, b.cfg, std::move(b.steps), out);
            } else {
                int running_now = b.st == Status::Running ? static_cast<int>(i) : -1;
                settle_composite(n, b.cfg, b.st, running_now, std::move(b.steps), out);
            }
        }
    }

    void settle_composite(const TreeNode& n, const Cfg& cfg, Status st, int running_now,
                          std::vector<std::string> steps, std::vector<Branch>& out) {
        const int idx = shape->index.at(&n);
        std::vector<std::pair<Cfg, std::vector<std::string>>> settled;
        if (cfg.runch[idx] >= 0 && cfg.runch[idx] != running_now)
            settled = halt_subtree(*n.children[static_cast<std::size_t>(cfg.runch[idx])],
                                   cfg, std::move(steps));
        else
            settled.emplace_back(cfg, std::move(steps));
        for (auto& [cf, stp] : settled) {
            Branch b;
            b.cfg = std::move(cf);
            b.cfg.runch[idx] = running_now;
            b.st = st;
            b.steps = std::move(stp);
            out.push_back(std::move(b));
        }
    }

    void mem_step(const TreeNode& n, std::size_t k, const Cfg& cfg,
                  std::vector<std::string> steps, std::vector<Branch>& out) {
        const int idx = shape->index.at(&n);
        if (k == n.children.size()) {
            Branch b;
            b.cfg = cfg;
            b.cfg.mem[idx] = 0;
            b.cfg.runch[idx] = -1;
            b.st = Status::Success;
            b.steps = std::move(steps);
            out.push_back(std::move(b));
            return;
        }
        for (Branch& b : tick_node(*n.children[k], cfg, steps)) {
            if (b.st == Status::Running) {
                b.cfg.mem[idx] = static_cast<int>(k);
                b.cfg.runch[idx] = static_cast<int>(k);
                out.push_back(std::move(b));
            } else if (b.st == Status::Failure) {
                b.cfg.mem[idx] = 0;
                b.cfg.runch[idx] = -1;
                out.push_back(std::move(b));
            } else {
                b.cfg.mem[idx] = static_cast<int>(k) + 1;
                b.cfg.runch[idx] = -1;
                mem_step(n, k + 1, b.cfg, std::move(b.steps), out);
            }
        }
    }
};

std::string join_steps(const std::vector<std::string>& steps) {
    std::string s;
    for (const auto& st : steps) {
        if (!s.empty()) s += " ";
        s += st;
    }
    return s;
}

}  // namespace

ConsistencyReport check_internal_composition(const std::vector<const RoleAutomaton*>& roles,
                                             const TreeNode& coordinator,
                                             const InternalCheckOptions& opts) {
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (!roles[i]) throw Error("internal composition: null role");
        for (std::size_t j = i + 1; j < roles.size(); ++j)
            if (roles[i] == roles[j])
                throw RoleReuseError(roles[i]->name);
    }

    Shape shape;
    collect_shape(coordinator, shape);
    if (shape.leaves.size() != roles.size())
        throw Error("internal composition: coordinator has " +
                    std::to_string(shape.leaves.size()) + " leaf endpoint(s) but " +
                    std::to_string(roles.size()) + " role(s) were supplied");

    const RoleAutomaton parent = builtin_roles().first;
    Sim sim;
    sim.shape = &shape;
    sim.parent = &parent;
    sim.halt_preempted = opts.halt_preempted_leaves;
    for (const auto* r : roles) {
        r->validate();
        if (r->inputs != parent.outputs || r->outputs != parent.inputs)
            throw AlphabetMismatchError("role '" + r->name +
                                        "' is not alphabet-dual to the parent endpoint");
        LinkModel lm;
        lm.child = r;
        for (const auto& s : parent.state_order) {
            lm.pindex[s] = static_cast<int>(lm.pnames.size());
            lm.pnames.push_back(s);
        }
        for (const auto& s : r->state_order) {
            lm.cindex[s] = static_cast<int>(lm.cnames.size());
            lm.cnames.push_back(s);
        }
        sim.links.push_back(std::move(lm));
    }

    Cfg init;
    init.mem.assign(shape.nodes.size(), 0);
    init.runch.assign(shape.nodes.size(), -1);
    init.ps.reserve(roles.size());
    init.cs.reserve(roles.size());
    for (const auto& lm : sim.links) {
        init.ps.push_back(lm.pindex.at(parent.initial));
        init.cs.push_back(lm.cindex.at(lm.child->initial));
        init.running.push_back(0);
    }

    // explore the configuration graph (one edge = one coordinator tick)
    std::map<Cfg, std::size_t> index;
    std::vector<Cfg> configs;
    std::vector<std::vector<std::size_t>> succ;
    std::vector<bool> terminal, goal;
    std::vector<std::vector<std::string>> path;  // shortest tick log per config

    auto intern = [&](const Cfg& c) {
        auto it = index.find(c);
        if (it != index.end()) return it->second;
        std::size_t id = configs.size();
        if (id >= opts.max_configs)
            throw StateSpaceTooLargeError("internal composition exceeds " +
                                          std::to_string(opts.max_configs) +
                                          " configurations");
        index.emplace(c, id);
        configs.push_back(c);
        succ.emplace_back();
        terminal.push_back(false);
        goal.push_back(false);
        path.emplace_back();
        return id;
    };

    auto link_accepting = [&](const Cfg& c, std::size_t li) {
        const LinkModel& lm = sim.links[li];
        return parent.accepting.count(lm.pnames[static_cast<std::size_t>(c.ps[li])]) > 0 &&
               lm.child->accepting.count(lm.cnames[static_cast<std::size_t>(c.cs[li])]) > 0;
    };

    ConsistencyReport rep;
    intern(init);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const Cfg cur = configs[i];
        sim.base_path = path[i];
        auto branches = sim.tick_node(coordinator, cur, {});
        std::size_t k = path[i].size();
        for (Branch& b : branches) {
            std::size_t j = intern(b.cfg);
            succ[i].push_back(j);
            if (path[j].empty() && j != 0) {
                path[j] = path[i];
                path[j].push_back("[" + std::to_string(k) + "] " + join_steps(b.steps) +
                                  " -> root " + std::string(1, to_char(b.st)));
            }
            if (b.st != Status::Running) {
                terminal[j] = true;
                bool ok = true;
                for (std::size_t li = 0; li < sim.links.size(); ++li)
                    ok = ok && link_accepting(b.cfg, li);
                if (ok) goal[j] = true;
            }
        }
    }
    rep.states_explored = configs.size();

    // terminal configurations must satisfy every link's acceptance condition
    std::size_t reported_terminals = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!terminal[i] || goal[i]) continue;
        if (reported_terminals++ >= 10) break;
        Finding f;
        f.kind = FindingKind::AcceptanceUnreachable;
        std::string bad;
        for (std::size_t li = 0; li < sim.links.size(); ++li) {
            if (link_accepting(configs[i], li)) continue;
            if (!bad.empty()) bad += ", ";
            bad += shape.leaves[li]->id + " (parent=" +
                   sim.links[li].pnames[static_cast<std::size_t>(configs[i].ps[li])] +
                   " child=" +
                   sim.links[li].cnames[static_cast<std::size_t>(configs[i].cs[li])] + ")";
        }
        f.state = "session end with non-quiescent link(s): " + bad;
        f.detail = "the session ends while a link is outside its acceptance condition";
        f.witness = path[i];
        rep.findings.push_back(std::move(f));
    }

    // every reachable configuration must still be able to reach some goal
    {
        std::vector<bool> can_goal(configs.size(), false);
        std::vector<std::vector<std::size_t>> rev(configs.size());
        for (std::size_t i = 0; i < configs.size(); ++i)
            for (auto j : succ[i]) rev[j].push_back(i);
        std::deque<std::size_t> q;
        for (std::size_t i = 0; i < configs.size(); ++i)
            if (goal[i]) {
                can_goal[i] = true;
                q.push_back(i);
            }
        while (!q.empty()) {
            auto i = q.front();
            q.pop_front();
            for (auto j : rev[i])
                if (!can_goal[j]) {
                    can_goal[j] = true;
                    q.push_back(j);
                }
        }
        std::size_t doomed = 0, first = configs.size();
        for (std::size_t i = 0; i < configs.size(); ++i)
            if (!can_goal[i]) {
                ++doomed;
                if (first == configs.size() || path[i].size() < path[first].size())
                    first = i;
            }
        // terminal misses are already reported individually; add the summary
        // finding when a non-terminal configuration is doomed as well
        bool extra = false;
        for (std::size_t i = 0; i < configs.size(); ++i)
            if (!can_goal[i] && !terminal[i]) extra = true;
        if (doomed > 0 && (extra || reported_terminals == 0)) {
            Finding f;
            f.kind = FindingKind::AcceptanceUnreachable;
            f.state = std::to_string(doomed) + " of " + std::to_string(configs.size()) +
                      " reachable configuration(s) cannot reach a quiescent session end";
            f.detail = f.state;
            f.witness = path[first];
            rep.findings.push_back(std::move(f));
        }
    }

    for (auto& f : sim.stuck) rep.findings.push_back(std::move(f));
    rep.consistent = rep.findings.empty();
    return rep;
}

}  // namespace btweave
