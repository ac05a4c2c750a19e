#include "btweave/btsync.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "btweave/errors.hpp"
#include "btweave/executor.hpp"

namespace btweave {

namespace {

const char* dir_word(RoleAutomaton::Dir d) {
    return d == RoleAutomaton::Dir::Input ? "on" : "emit";
}

}  // namespace

// ---------------------------------------------------------------------------
// RoleAutomaton
// ---------------------------------------------------------------------------

void RoleAutomaton::validate() const {
    if (name.empty()) throw Error("role has no name");
    if (states.empty()) throw Error("role '" + name + "' has no states");
    if (!states.count(initial))
        throw Error("role '" + name + "': unknown initial state '" + initial + "'");
    for (const auto& a : accepting)
        if (!states.count(a))
            throw Error("role '" + name + "': unknown accepting state '" + a + "'");
    for (const auto& [st, trans] : states) {
        std::set<std::string> seen_inputs;
        for (const auto& t : trans) {
            if (!states.count(t.to))
                throw Error("role '" + name + "': state '" + st +
                            "' has a transition to unknown state '" + t.to + "'");
            const auto& alpha = t.dir == Dir::Input ? inputs : outputs;
            if (!alpha.count(t.msg))
                throw Error("role '" + name + "': message '" + t.msg +
                            "' is not in the declared " +
                            (t.dir == Dir::Input ? "input" : "output") + " alphabet");
            if (t.dir == Dir::Input && !seen_inputs.insert(t.msg).second)
                throw Error("role '" + name + "': state '" + st +
                            "' consumes '" + t.msg + "' twice");
        }
    }
}

std::string RoleAutomaton::to_text() const {
    std::ostringstream out;
    out << "role " << name << "\n";
    auto alphabet_line = [&](const char* kw, const std::set<std::string>& a) {
        out << "  " << kw;
        for (const auto& m : a) out << " " << m;
        out << "\n";
    };
    alphabet_line("inputs", inputs);
    alphabet_line("outputs", outputs);
    for (const auto& st : state_order) {
        out << "  state " << st;
        if (st == initial) out << " initial";
        if (accepting.count(st)) out << " accept";
        out << "\n";
        for (const auto& t : states.at(st))
            out << "    " << dir_word(t.dir) << " " << t.msg << " -> " << t.to << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Text format parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
    std::string text;
    std::size_t col = 0;  // 1-based
};

std::vector<Token> tokenize_line(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
               line[i] != '#')
            ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

}  // namespace

std::vector<RoleAutomaton> parse_roles(const std::string& text) {
    std::vector<RoleAutomaton> roles;
    RoleAutomaton* cur = nullptr;
    std::string cur_state;

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = tokenize_line(line);
        if (toks.empty()) continue;
        const auto& kw = toks[0];
        auto need = [&](std::size_t n, const std::string& what) {
            if (toks.size() < n) {
                std::size_t col = line.size() + 1;
                throw SyntaxError(lineno, col, what);
            }
        };
        auto reject_extra = [&](std::size_t n) {
            if (toks.size() > n)
                throw SyntaxError(lineno, toks[n].col, "end of line");
        };

        if (kw.text == "role") {
            need(2, "role name");
            reject_extra(2);
            roles.emplace_back();
            cur = &roles.back();
            cur->name = toks[1].text;
            cur_state.clear();
        } else if (kw.text == "inputs" || kw.text == "outputs") {
            if (!cur) throw SyntaxError(lineno, kw.col, "'role' before '" + kw.text + "'");
            auto& alpha = kw.text == "inputs" ? cur->inputs : cur->outputs;
            for (std::size_t i = 1; i < toks.size(); ++i) alpha.insert(toks[i].text);
        } else if (kw.text == "state") {
            if (!cur) throw SyntaxError(lineno, kw.col, "'role' before 'state'");
            need(2, "state name");
            cur_state = toks[1].text;
            if (cur->states.count(cur_state))
                throw SyntaxError(lineno, toks[1].col, "a fresh state name");
            cur->states[cur_state];
            cur->state_order.push_back(cur_state);
            for (std::size_t i = 2; i < toks.size(); ++i) {
                if (toks[i].text == "initial") {
                    if (!cur->initial.empty())
                        throw SyntaxError(lineno, toks[i].col, "a single initial state");
                    cur->initial = cur_state;
                } else if (toks[i].text == "accept") {
                    cur->accepting.insert(cur_state);
                } else {
                    throw SyntaxError(lineno, toks[i].col, "'initial' or 'accept'");
                }
            }
        } else if (kw.text == "on" || kw.text == "emit") {
            if (!cur || cur_state.empty())
                throw SyntaxError(lineno, kw.col, "'state' before '" + kw.text + "'");
            need(2, "message name");
            need(3, "'->'");
            if (toks[2].text != "->") throw SyntaxError(lineno, toks[2].col, "'->'");
            need(4, "target state");
            reject_extra(4);
            RoleAutomaton::Transition t;
            t.dir = kw.text == "on" ? RoleAutomaton::Dir::Input : RoleAutomaton::Dir::Output;
            t.msg = toks[1].text;
            t.to = toks[3].text;
            cur->states[cur_state].push_back(std::move(t));
        } else {
            throw SyntaxError(lineno, kw.col,
                              "'role', 'inputs', 'outputs', 'state', 'on' or 'emit'");
        }
    }
    for (auto& r : roles) {
        // alphabets may be omitted in hand-written files; derive them then
        if (r.inputs.empty() && r.outputs.empty()) {
            for (const auto& [st, trans] : r.states)
                for (const auto& t : trans)
                    (t.dir == RoleAutomaton::Dir::Input ? r.inputs : r.outputs).insert(t.msg);
        }
        if (r.initial.empty() && !r.state_order.empty()) r.initial = r.state_order.front();
        r.validate();
    }
    return roles;
}

// ---------------------------------------------------------------------------
// Builtin roles and mutants
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kParentInputs = {"STATUS_R", "STATUS_S", "STATUS_F", "HALT_ACK"};
const std::set<std::string> kParentOutputs = {"TICK", "HALT"};

RoleAutomaton make_role(std::string name, std::string initial,
                        std::vector<std::string> order,
                        std::set<std::string> accepting,
                        std::set<std::string> inputs, std::set<std::string> outputs) {
    RoleAutomaton r;
    r.name = std::move(name);
    r.initial = std::move(initial);
    r.state_order = std::move(order);
    for (const auto& s : r.state_order) r.states[s];
    r.accepting = std::move(accepting);
    r.inputs = std::move(inputs);
    r.outputs = std::move(outputs);
    return r;
}

void on(RoleAutomaton& r, const std::string& st, const std::string& msg,
        const std::string& to) {
    r.states.at(st).push_back({RoleAutomaton::Dir::Input, msg, to});
}

void emit(RoleAutomaton& r, const std::string& st, const std::string& msg,
          const std::string& to) {
    r.states.at(st).push_back({RoleAutomaton::Dir::Output, msg, to});
}

}  // namespace

std::pair<RoleAutomaton, RoleAutomaton> builtin_roles() {
    auto parent = make_role("parent", "Idle", {"Idle", "AwaitStatus", "AwaitHaltAck", "Done"},
                            {"Idle", "Done"}, kParentInputs, kParentOutputs);
    emit(parent, "Idle", "TICK", "AwaitStatus");
    emit(parent, "Idle", "HALT", "AwaitHaltAck");
    on(parent, "AwaitStatus", "STATUS_R", "Idle");
    on(parent, "AwaitStatus", "STATUS_S", "Done");
    on(parent, "AwaitStatus", "STATUS_F", "Done");
    on(parent, "AwaitHaltAck", "HALT_ACK", "Idle");
    emit(parent, "Done", "TICK", "AwaitStatus");
    emit(parent, "Done", "HALT", "AwaitHaltAck");

    auto child = make_role("child", "Idle", {"Idle", "Responding", "Running", "AckHalt"},
                           {"Idle"}, kParentOutputs, kParentInputs);
    on(child, "Idle", "TICK", "Responding");
    on(child, "Idle", "HALT", "AckHalt");
    emit(child, "Responding", "STATUS_R", "Running");
    emit(child, "Responding", "STATUS_S", "Idle");
    emit(child, "Responding", "STATUS_F", "Idle");
    on(child, "Running", "TICK", "Responding");
    on(child, "Running", "HALT", "AckHalt");
    emit(child, "AckHalt", "HALT_ACK", "Idle");

    parent.validate();
    child.validate();
    return {std::move(parent), std::move(child)};
}

RoleAutomaton mutant_double_tick_parent() {
    auto r = make_role("double_tick_parent", "Idle",
                       {"Idle", "Ticking", "AwaitStatus", "AwaitHaltAck", "Done"},
                       {"Idle", "Done"}, kParentInputs, kParentOutputs);
    emit(r, "Idle", "TICK", "Ticking");
    emit(r, "Idle", "HALT", "AwaitHaltAck");
    emit(r, "Ticking", "TICK", "AwaitStatus");  // second tick without awaiting a status
    on(r, "AwaitStatus", "STATUS_R", "Idle");
    on(r, "AwaitStatus", "STATUS_S", "Done");
    on(r, "AwaitStatus", "STATUS_F", "Done");
    on(r, "AwaitHaltAck", "HALT_ACK", "Idle");
    emit(r, "Done", "TICK", "Ticking");
    emit(r, "Done", "HALT", "AwaitHaltAck");
    r.validate();
    return r;
}

RoleAutomaton mutant_silent_child() {
    auto r = make_role("silent_child", "Idle", {"Idle", "Responding", "Running", "AckHalt"},
                       {"Idle"}, kParentOutputs, kParentInputs);
    on(r, "Idle", "TICK", "Responding");
    on(r, "Idle", "HALT", "AckHalt");
    // Responding never answers
    on(r, "Running", "TICK", "Responding");
    on(r, "Running", "HALT", "AckHalt");
    emit(r, "AckHalt", "HALT_ACK", "Idle");
    r.validate();
    return r;
}

RoleAutomaton mutant_pingpong_parent() {
    auto r = make_role("pingpong_parent", "Idle", {"Idle", "AwaitStatus", "Done"},
                       {"Idle", "Done"}, kParentInputs, kParentOutputs);
    emit(r, "Idle", "TICK", "AwaitStatus");  // never emits HALT
    on(r, "AwaitStatus", "STATUS_R", "Idle");
    on(r, "AwaitStatus", "STATUS_S", "Done");
    on(r, "AwaitStatus", "STATUS_F", "Done");
    emit(r, "Done", "TICK", "AwaitStatus");
    r.validate();
    return r;
}

RoleAutomaton mutant_pingpong_child() {
    auto r = make_role("pingpong_child", "Idle", {"Idle", "Responding", "Running", "AckHalt"},
                       {"Idle"}, kParentOutputs, kParentInputs);
    on(r, "Idle", "TICK", "Responding");
    on(r, "Idle", "HALT", "AckHalt");
    emit(r, "Responding", "STATUS_R", "Running");  // never settles to Success or Failure
    on(r, "Running", "TICK", "Responding");
    on(r, "Running", "HALT", "AckHalt");
    emit(r, "AckHalt", "HALT_ACK", "Idle");
    r.validate();
    return r;
}

RoleAutomaton mutant_deaf_child() {
    auto r = make_role("deaf_child", "Idle", {"Idle", "Responding", "Running"}, {"Idle"},
                       kParentOutputs, kParentInputs);
    on(r, "Idle", "TICK", "Responding");  // no HALT handling anywhere
    emit(r, "Responding", "STATUS_R", "Running");
    emit(r, "Responding", "STATUS_S", "Idle");
    emit(r, "Responding", "STATUS_F", "Idle");
    on(r, "Running", "TICK", "Responding");
    r.validate();
    return r;
}

RoleAutomaton mutant_wrong_ack_child() {
    auto r = make_role("wrong_ack_child", "Idle", {"Idle", "Responding", "Running", "AckHalt"},
                       {"Idle"}, kParentOutputs, kParentInputs);
    on(r, "Idle", "TICK", "Responding");
    on(r, "Idle", "HALT", "AckHalt");
    emit(r, "Responding", "STATUS_R", "Running");
    emit(r, "Responding", "STATUS_S", "Idle");
    emit(r, "Responding", "STATUS_F", "Idle");
    on(r, "Running", "TICK", "Responding");
    on(r, "Running", "HALT", "AckHalt");
    emit(r, "AckHalt", "STATUS_R", "Idle");  // acknowledges the halt with the wrong message
    r.validate();
    return r;
}

// ---------------------------------------------------------------------------
// Product construction
// ---------------------------------------------------------------------------

std::string ProductState::to_string() const {
    std::string s = "(parent=" + parent + " child=" + child;
    s += " chan_pc=" + (chan_pc.empty() ? std::string("-") : chan_pc);
    s += " chan_cp=" + (chan_cp.empty() ? std::string("-") : chan_cp);
    s += ")";
    return s;
}

ProtocolAutomaton compose(const RoleAutomaton& parent, const RoleAutomaton& child) {
    parent.validate();
    child.validate();
    if (parent.outputs != child.inputs || child.outputs != parent.inputs) {
        auto render = [](const std::set<std::string>& a) {
            std::string s = "{";
            for (const auto& m : a) s += (s.size() > 1 ? " " : "") + m;
            return s + "}";
        };
        throw AlphabetMismatchError(
            "role alphabets are not dual: parent emits " + render(parent.outputs) +
            " / child consumes " + render(child.inputs) + ", child emits " +
            render(child.outputs) + " / parent consumes " + render(parent.inputs));
    }

    ProtocolAutomaton p;
    p.parent = parent;
    p.child = child;

    std::map<ProductState, std::size_t> index;
    auto intern = [&](const ProductState& s) {
        auto it = index.find(s);
        if (it != index.end()) return it->second;
        std::size_t id = p.states.size();
        index.emplace(s, id);
        p.states.push_back(s);
        p.transitions.emplace_back();
        p.accepting.push_back(false);
        return id;
    };

    ProductState init;
    init.parent = parent.initial;
    init.child = child.initial;
    intern(init);

    for (std::size_t i = 0; i < p.states.size(); ++i) {
        const ProductState cur = p.states[i];  // copy: vector may reallocate
        p.accepting[i] = parent.accepting.count(cur.parent) &&
                         child.accepting.count(cur.child) && cur.chan_pc.empty() &&
                         cur.chan_cp.empty();

        auto expand = [&](bool is_parent) {
            const RoleAutomaton& role = is_parent ? parent : child;
            const std::string& st = is_parent ? cur.parent : cur.child;
            for (const auto& t : role.states.at(st)) {
                ProductState next = cur;
                std::string label = (is_parent ? "parent" : "child");
                if (t.dir == RoleAutomaton::Dir::Output) {
                    std::string& out_chan = is_parent ? next.chan_pc : next.chan_cp;
                    label += "!" + t.msg;
                    if (!out_chan.empty()) {
                        p.overflows.push_back({i, label});
                        continue;
                    }
                    out_chan = t.msg;
                } else {
                    std::string& in_chan = is_parent ? next.chan_cp : next.chan_pc;
                    if (in_chan != t.msg) continue;  // nothing (matching) to consume
                    in_chan.clear();
                    label += "?" + t.msg;
                }
                (is_parent ? next.parent : next.child) = t.to;
                // intern may grow p.transitions; take the index before touching it
                const std::size_t to = intern(next);
                p.transitions[i].push_back({label, to});
            }
        };
        expand(true);
        expand(false);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Consistency checking
// ---------------------------------------------------------------------------

std::string to_string(FindingKind k) {
    switch (k) {
        case FindingKind::Deadlock: return "deadlock";
        case FindingKind::Livelock: return "livelock";
        case FindingKind::ChannelOverflow: return "channel-overflow";
        case FindingKind::AcceptanceUnreachable: return "acceptance-unreachable";
    }
    return "?";
}

namespace {

// shortest label path from state 0 to every state (compose only emits
// reachable states, so every index has a path)
struct BfsTree {
    std::vector<int> pred;
    std::vector<std::string> label;
    std::vector<std::size_t> dist;
};

BfsTree bfs_from_initial(const ProtocolAutomaton& p) {
    BfsTree t;
    const std::size_t n = p.states.size();
    t.pred.assign(n, -1);
    t.label.assign(n, "");
    t.dist.assign(n, static_cast<std::size_t>(-1));
    std::deque<std::size_t> q;
    t.dist[0] = 0;
    q.push_back(0);
    while (!q.empty()) {
        auto i = q.front();
        q.pop_front();
        for (const auto& tr : p.transitions[i]) {
            if (t.dist[tr.to] != static_cast<std::size_t>(-1)) continue;
            t.dist[tr.to] = t.dist[i] + 1;
            t.pred[tr.to] = static_cast<int>(i);
            t.label[tr.to] = tr.label;
            q.push_back(tr.to);
        }
    }
    return t;
}

std::vector<std::string> path_to(const BfsTree& t, std::size_t target) {
    std::vector<std::string> out;
    for (std::size_t i = target; t.pred[i] >= 0; i = static_cast<std::size_t>(t.pred[i]))
        out.push_back(t.label[i]);
    std::reverse(out.begin(), out.end());
    return out;
}

// Kosaraju strongly connected components
std::vector<int> scc_of(const ProtocolAutomaton& p) {
    const std::size_t n = p.states.size();
    std::vector<std::vector<std::size_t>> rev(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& tr : p.transitions[i]) rev[tr.to].push_back(i);

    std::vector<bool> seen(n, false);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        // iterative post-order
        std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
        seen[s] = true;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < p.transitions[node].size()) {
                auto to = p.transitions[node][next++].to;
                if (!seen[to]) {
                    seen[to] = true;
                    stack.push_back({to, 0});
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] >= 0) continue;
        std::deque<std::size_t> q{*it};
        comp[*it] = ncomp;
        while (!q.empty()) {
            auto i = q.front();
            q.pop_front();
            for (auto j : rev[i]) {
                if (comp[j] >= 0) continue;
                comp[j] = ncomp;
                q.push_back(j);
            }
        }
        ++ncomp;
    }
    return comp;
}

// shortest cycle through `start`, restricted to its own SCC
std::vector<std::string> cycle_through(const ProtocolAutomaton& p, std::size_t start,
                                       const std::vector<int>& comp) {
    const std::size_t n = p.states.size();
    std::vector<int> pred(n, -1);
    std::vector<std::string> label(n);
    std::deque<std::size_t> q{start};
    std::vector<bool> seen(n, false);
    seen[start] = true;
    while (!q.empty()) {
        auto i = q.front();
        q.pop_front();
        for (const auto& tr : p.transitions[i]) {
            if (comp[tr.to] != comp[start]) continue;
            if (tr.to == start) {
                std::vector<std::string> out{tr.label};
                for (std::size_t j = i; pred[j] >= 0; j = static_cast<std::size_t>(pred[j]))
                    out.push_back(label[j]);
                // labels were collected back-to-front relative to the walk
                std::reverse(out.begin(), out.end());
                return out;
            }
            if (seen[tr.to]) continue;
            seen[tr.to] = true;
            pred[tr.to] = static_cast<int>(i);
            label[tr.to] = tr.label;
            q.push_back(tr.to);
        }
    }
    return {};
}

}  // namespace

ConsistencyReport check_consistency(const ProtocolAutomaton& p) {
    ConsistencyReport rep;
    rep.states_explored = p.states.size();
    if (p.states.size() > kMaxFtsStates)
        throw StateSpaceTooLargeError("protocol product has " +
                                      std::to_string(p.states.size()) + " states");

    auto tree = bfs_from_initial(p);

    // deadlocks: reachable, not accepting, no way out
    for (std::size_t i = 0; i < p.states.size(); ++i) {
        if (p.transitions[i].empty() && !p.accepting[i]) {
            Finding f;
            f.kind = FindingKind::Deadlock;
            f.state = p.states[i].to_string();
            f.witness = path_to(tree, i);
            f.detail = "no transition is enabled and the state is not accepting";
            rep.findings.push_back(std::move(f));
        }
    }

    // livelocks: a cycle from which no accepting state is reachable
    std::vector<bool> can_accept(p.states.size(), false);
    {
        std::vector<std::vector<std::size_t>> rev(p.states.size());
        for (std::size_t i = 0; i < p.states.size(); ++i)
            for (const auto& tr : p.transitions[i]) rev[tr.to].push_back(i);
        std::deque<std::size_t> q;
        for (std::size_t i = 0; i < p.states.size(); ++i)
            if (p.accepting[i]) {
                can_accept[i] = true;
                q.push_back(i);
            }
        while (!q.empty()) {
            auto i = q.front();
            q.pop_front();
            for (auto j : rev[i])
                if (!can_accept[j]) {
                    can_accept[j] = true;
                    q.push_back(j);
                }
        }
    }
    auto comp = scc_of(p);
    int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<std::size_t> comp_size(ncomp, 0);
    std::vector<bool> comp_self_loop(ncomp, false), comp_accepts(ncomp, false);
    for (std::size_t i = 0; i < p.states.size(); ++i) {
        ++comp_size[comp[i]];
        if (can_accept[i]) comp_accepts[comp[i]] = true;
        for (const auto& tr : p.transitions[i])
            if (tr.to == i) comp_self_loop[comp[i]] = true;
    }
    for (int c = 0; c < ncomp; ++c) {
        if (comp_accepts[c]) continue;
        if (comp_size[c] < 2 && !comp_self_loop[c]) continue;
        // representative: the member closest to the initial state
        std::size_t rep_state = p.states.size();
        for (std::size_t i = 0; i < p.states.size(); ++i)
            if (comp[i] == c &&
                (rep_state == p.states.size() || tree.dist[i] < tree.dist[rep_state]))
                rep_state = i;
        Finding f;
        f.kind = FindingKind::Livelock;
        f.state = p.states[rep_state].to_string();
        f.witness = path_to(tree, rep_state);
        auto cyc = cycle_through(p, rep_state, comp);
        f.witness.insert(f.witness.end(), cyc.begin(), cyc.end());
        f.detail = "a cycle of " + std::to_string(comp_size[c]) +
                   " state(s) from which no accepting state is reachable";
        rep.findings.push_back(std::move(f));
    }

    rep.consistent = rep.findings.empty();

    for (const auto& ov : p.overflows) {
        Finding f;
        f.kind = FindingKind::ChannelOverflow;
        f.state = p.states[ov.state].to_string();
        f.witness = path_to(tree, ov.state);
        f.detail = "emission '" + ov.label + "' attempted while its channel is full";
        rep.findings.push_back(std::move(f));
    }
    rep.consistent = rep.consistent && p.overflows.empty();
    return rep;
}

std::string ConsistencyReport::to_text() const {
    std::ostringstream out;
    out << "states explored: " << states_explored << "\n";
    out << "consistent: " << (consistent ? "yes" : "no") << "\n";
    for (const auto& f : findings) {
        out << btweave::to_string(f.kind) << " at " << f.state << ": " << f.detail << "\n";
        out << "  witness:";
        if (f.witness.empty()) out << " (initial state)";
        for (const auto& step : f.witness) out << " " << step;
        out << "\n";
    }
    return out.str();
}

ProductState replay_witness(const RoleAutomaton& parent, const RoleAutomaton& child,
                            const std::vector<std::string>& labels) {
    ProductState s;
    s.parent = parent.initial;
    s.child = child.initial;
    for (const auto& label : labels) {
        auto sep = label.find_first_of("!?");
        if (sep == std::string::npos || sep == 0)
            throw Error("malformed witness step '" + label + "'");
        const std::string who = label.substr(0, sep);
        const bool is_emit = label[sep] == '!';
        const std::string msg = label.substr(sep + 1);
        const bool is_parent = who == "parent";
        if (!is_parent && who != "child")
            throw Error("malformed witness step '" + label + "'");

        const RoleAutomaton& role = is_parent ? parent : child;
        std::string& st = is_parent ? s.parent : s.child;
        std::string& out_chan = is_parent ? s.chan_pc : s.chan_cp;
        std::string& in_chan = is_parent ? s.chan_cp : s.chan_pc;

        const RoleAutomaton::Transition* hit = nullptr;
        for (const auto& t : role.states.at(st)) {
            bool want_emit = t.dir == RoleAutomaton::Dir::Output;
            if (want_emit == is_emit && t.msg == msg) {
                hit = &t;
                break;
            }
        }
        if (!hit)
            throw Error("witness step '" + label + "' has no transition from state '" + st +
                        "'");
        if (is_emit) {
            if (!out_chan.empty())
                throw Error("witness step '" + label + "' emits into a full channel");
            out_chan = msg;
        } else {
            if (in_chan != msg)
                throw Error("witness step '" + label + "' consumes '" + msg +
                            "' but the channel holds '" + in_chan + "'");
            in_chan.clear();
        }
        st = hit->to;
    }
    return s;
}

}  // namespace btweave
