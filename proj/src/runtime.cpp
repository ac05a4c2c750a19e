#include "btweave/runtime.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <sstream>

#include "btweave/btsync.hpp"
#include "btweave/errors.hpp"

namespace btweave {

const HostSpec* Deployment::find_host(const std::string& id) const {
    for (const auto& h : hosts)
        if (h.id == id) return &h;
    return nullptr;
}

HostSpec* Deployment::find_host(const std::string& id) {
    for (auto& h : hosts)
        if (h.id == id) return &h;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Topology validation
// ---------------------------------------------------------------------------

namespace {

void collect_remotes(TreeNode& n, std::vector<TreeNode*>& out) {
    if (n.kind == NodeKind::Remote) out.push_back(&n);
    for (auto& c : n.children) collect_remotes(*c, out);
}

const TreeNode* find_node(const TreeNode& n, const std::string& id) {
    if (n.id == id) return &n;
    for (const auto& c : n.children)
        if (const TreeNode* hit = find_node(*c, id)) return hit;
    return nullptr;
}

bool is_leaf_kind(NodeKind k) {
    return k == NodeKind::Condition || k == NodeKind::Action || k == NodeKind::Remote;
}

std::string type_name(ValueType t, const std::string& unit) {
    std::string s = to_string(t);
    if (!unit.empty()) s += ":" + unit;
    return s;
}

}  // namespace

std::string ValidationReport::to_text() const {
    std::ostringstream out;
    out << "topology: " << (ok ? "valid" : "invalid") << "\n";
    if (!root_host.empty()) out << "root host: " << root_host << "\n";
    for (const auto& v : violations) out << "violation: " << v << "\n";
    return out.str();
}

ValidationReport validate_topology(const Deployment& d) {
    ValidationReport rep;
    auto flag = [&](const std::string& v) { rep.violations.push_back(v); };

    std::map<std::string, std::size_t> host_idx;
    for (std::size_t i = 0; i < d.hosts.size(); ++i) {
        const HostSpec& h = d.hosts[i];
        if (h.id.empty()) flag("host #" + std::to_string(i) + " has an empty id");
        if (!host_idx.emplace(h.id, i).second) flag("duplicate host id '" + h.id + "'");
        if (!h.tree) {
            flag("host '" + h.id + "' has no tree");
            continue;
        }
        if (h.tree_name.empty()) flag("host '" + h.id + "' has no tree name");
        try {
            h.tree->validate();
        } catch (const Error& e) {
            flag("host '" + h.id + "': " + e.what());
        }
        std::set<std::string> port_names;
        for (const auto& p : h.ports) {
            if (!port_names.insert(p.name).second)
                flag("host '" + h.id + "': duplicate port name '" + p.name + "'");
            const TreeNode* owner = find_node(*h.tree, p.node);
            if (!owner)
                flag("host '" + h.id + "': port '" + p.name + "' references unknown node '" +
                     p.node + "'");
            else if (!is_leaf_kind(owner->kind))
                flag("host '" + h.id + "': port '" + p.name + "' attaches to non-leaf node '" +
                     p.node + "' (data links connect leaves only)");
            if (!h.world.has(p.variable)) {
                flag("host '" + h.id + "': port '" + p.name + "' binds unknown variable '" +
                     p.variable + "'");
            } else {
                const Value& v = h.world.get(p.variable);
                if (v.type() != p.type || (p.type == ValueType::Real && v.unit() != p.unit))
                    flag("host '" + h.id + "': port '" + p.name + "' type " +
                         type_name(p.type, p.unit) + " does not match variable '" +
                         p.variable + "' of type " + type_name(v.type(), v.unit()));
            }
        }
    }

    // control edges from remote leaves
    std::vector<std::vector<std::size_t>> edges(d.hosts.size());
    std::vector<int> indegree(static_cast<int>(d.hosts.size()), 0);
    for (std::size_t i = 0; i < d.hosts.size(); ++i) {
        if (!d.hosts[i].tree) continue;
        std::vector<TreeNode*> remotes;
        collect_remotes(*d.hosts[i].tree, remotes);
        for (const TreeNode* r : remotes) {
            auto it = host_idx.find(r->remote_host);
            if (it == host_idx.end()) {
                flag("host '" + d.hosts[i].id + "': remote leaf '" + r->id +
                     "' references unknown host '" + r->remote_host + "'");
                continue;
            }
            const HostSpec& target = d.hosts[it->second];
            if (target.tree_name != r->remote_tree)
                flag("host '" + d.hosts[i].id + "': remote leaf '" + r->id +
                     "' references unknown tree '" + r->remote_host + "." + r->remote_tree +
                     "'");
            if (it->second == i)
                flag("host '" + d.hosts[i].id + "': remote leaf '" + r->id +
                     "' ticks its own host");
            edges[i].push_back(it->second);
            ++indegree[it->second];
        }
    }

    for (std::size_t i = 0; i < d.hosts.size(); ++i)
        if (indegree[i] > 1)
            flag("host '" + d.hosts[i].id + "' has " + std::to_string(indegree[i]) +
                 " parent endpoints (at most one allowed)");

    // cycle detection (DFS colors); report one cycle with its path
    {
        std::vector<int> color(d.hosts.size(), 0);
        std::vector<std::size_t> stack;
        std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
            color[u] = 1;
            stack.push_back(u);
            for (auto v : edges[u]) {
                if (color[v] == 1) {
                    auto at = std::find(stack.begin(), stack.end(), v);
                    std::string cyc = d.hosts[v].id;
                    for (auto it2 = at + 1; it2 != stack.end(); ++it2)
                        cyc += " -> " + d.hosts[*it2].id;
                    cyc += " -> " + d.hosts[v].id;
                    flag("control cycle: " + cyc);
                    return true;
                }
                if (color[v] == 0 && dfs(v)) return true;
            }
            color[u] = 2;
            stack.pop_back();
            return false;
        };
        for (std::size_t i = 0; i < d.hosts.size() && rep.violations.empty(); ++i)
            if (color[i] == 0 && dfs(i)) break;
    }

    // single root, full reachability
    if (!d.hosts.empty()) {
        std::vector<std::size_t> roots;
        for (std::size_t i = 0; i < d.hosts.size(); ++i)
            if (indegree[i] == 0) roots.push_back(i);
        if (roots.empty()) {
            flag("control graph has no root host");
        } else if (roots.size() > 1) {
            std::string list;
            for (auto r : roots) list += (list.empty() ? "" : ", ") + d.hosts[r].id;
            flag("control graph has " + std::to_string(roots.size()) + " roots: " + list);
        } else {
            rep.root_host = d.hosts[roots[0]].id;
            std::vector<bool> seen(d.hosts.size(), false);
            std::vector<std::size_t> q{roots[0]};
            seen[roots[0]] = true;
            while (!q.empty()) {
                auto u = q.back();
                q.pop_back();
                for (auto v : edges[u])
                    if (!seen[v]) {
                        seen[v] = true;
                        q.push_back(v);
                    }
            }
            for (std::size_t i = 0; i < d.hosts.size(); ++i)
                if (!seen[i])
                    flag("host '" + d.hosts[i].id + "' is unreachable from root '" +
                         rep.root_host + "'");
        }
    }

    // data links
    auto find_port = [&](const std::string& host, const std::string& port)
        -> const DataPortSpec* {
        auto it = host_idx.find(host);
        if (it == host_idx.end()) return nullptr;
        for (const auto& p : d.hosts[it->second].ports)
            if (p.name == port) return &p;
        return nullptr;
    };
    for (const auto& l : d.data_links) {
        const DataPortSpec* from = find_port(l.from_host, l.from_port);
        const DataPortSpec* to = find_port(l.to_host, l.to_port);
        const std::string name =
            l.from_host + "." + l.from_port + " -> " + l.to_host + "." + l.to_port;
        if (!from || !to) {
            flag("data link " + name + " references an unknown port");
            continue;
        }
        if (!from->is_output) flag("data link " + name + ": source is not an output port");
        if (to->is_output) flag("data link " + name + ": target is not an input port");
        if (from->type != to->type || from->unit != to->unit)
            flag("data link " + name + ": type " + type_name(from->type, from->unit) +
                 " does not match " + type_name(to->type, to->unit));
    }

    rep.ok = rep.violations.empty();
    return rep;
}

// ---------------------------------------------------------------------------
// DataBus
// ---------------------------------------------------------------------------

DataBus::DataBus(const Deployment& d) {
    for (const auto& h : d.hosts)
        for (const auto& p : h.ports) ports_[{h.id, p.name}] = p;
    for (const auto& l : d.data_links)
        link_of_[{l.from_host, l.from_port}] = {l.to_host, l.to_port};
}

void DataBus::transfer(const std::string& host, const std::string& port, const Value& v) {
    auto it = ports_.find({host, port});
    if (it == ports_.end()) throw UnlinkedPortError(host + "." + port);
    const DataPortSpec& out = it->second;
    if (!out.is_output)
        throw Error("data port '" + host + "." + port + "' is not an output port");
    auto link = link_of_.find({host, port});
    if (link == link_of_.end()) throw UnlinkedPortError(host + "." + port);
    const DataPortSpec& in = ports_.at(link->second);
    if (v.type() != in.type ||
        (in.type == ValueType::Real && !v.unit().empty() && v.unit() != in.unit))
        throw TypeMismatchError(link->second.host + "." + link->second.port,
                                type_name(in.type, in.unit),
                                type_name(v.type(), v.unit()));
    cache_.insert_or_assign(link->second, v);
}

std::optional<Value> DataBus::last(const std::string& host, const std::string& port) const {
    auto it = cache_.find({host, port});
    if (it == cache_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Deployment execution
// ---------------------------------------------------------------------------

namespace {

struct LinkRuntime {
    std::size_t parent_host = 0, child_host = 0;
    TreeNode* leaf = nullptr;
    std::string node_name;  // tree addressed by this link
    // conformance monitor: both builtin role states, advanced on send/receive
    std::string pstate = "Idle", cstate = "Idle";
    // per-direction sequence numbers (sender side) and gap checks (receiver)
    std::uint64_t seq_pc = 0, seq_cp = 0, expect_pc = 0, expect_cp = 0;
    LinkLog log;
    // async bookkeeping
    bool outstanding = false, failed = false, pending_halt = false;
    double sent_time = 0.0;
    Status last_status = Status::Running;
};

struct HostRuntime {
    HostSpec* spec = nullptr;
    WorldState* world = nullptr;
    std::unique_ptr<Executor> ex;
    bool in_tick = false;
    std::map<std::size_t, Value> last_sent;  // per-link change detection
};

struct Event {
    double time = 0.0;
    std::uint64_t order = 0;
    enum Kind { ToChild, ToParent, DataDeliver } kind = ToChild;
    std::size_t link = 0;      // control link index, or data link index
    std::string line;          // encoded wire message
    bool operator>(const Event& o) const {
        return std::tie(time, order) > std::tie(o.time, o.order);
    }
};

class DeploymentRun {
  public:
    DeploymentRun(Deployment& d, const DeployOptions& opts)
        : d_(&d), opts_(opts), roles_(builtin_roles()), rng_(opts.seed) {}

    DeployResult run();

  private:
    Deployment* d_;
    DeployOptions opts_;
    std::pair<RoleAutomaton, RoleAutomaton> roles_;
    std::vector<HostRuntime> hosts_;
    std::vector<LinkRuntime> links_;
    std::map<const TreeNode*, std::size_t> link_by_leaf_;
    std::size_t root_ = 0;
    TickTrace merged_;
    DeployResult res_;
    double now_ = 0.0, dt_ = 1.0;
    std::mt19937_64 rng_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::uint64_t event_order_ = 0;
    std::vector<std::uint64_t> data_seq_;

    void build();
    Status proxy_tick(std::size_t link);
    void proxy_halt(std::size_t link);
    Status tick_host(std::size_t host);
    void propagate_ports(std::size_t host);
    void process_events_until(double t);
    void deliver(const Event& ev);
    double delay() {
        std::uniform_real_distribution<double> dist(opts_.delay_min, opts_.delay_max);
        return dist(rng_) * dt_;
    }

    // monitor + logging; `emit` advances the sender role, `consume` the
    // receiver role — a rejected step is a conformance violation
    std::string send_control(LinkRuntime& L, bool from_parent, MsgKind kind,
                             Status st = Status::Running);
    void consume_control(LinkRuntime& L, bool parent_side, const Message& m);
    static std::string label_of(bool from_parent, const Message& m);
    void step_role(LinkRuntime& L, bool parent_role, RoleAutomaton::Dir dir,
                   const std::string& label);
};

std::string DeploymentRun::label_of(bool from_parent, const Message& m) {
    switch (m.kind) {
        case MsgKind::Tick: return "TICK";
        case MsgKind::Halt: return from_parent ? "HALT" : "HALT_ACK";
        case MsgKind::Status: return std::string("STATUS_") + to_char(*m.status);
        case MsgKind::Data: break;
    }
    throw Error("DATA message on a control link");
}

void DeploymentRun::step_role(LinkRuntime& L, bool parent_role, RoleAutomaton::Dir dir,
                              const std::string& label) {
    const RoleAutomaton& role = parent_role ? roles_.first : roles_.second;
    std::string& st = parent_role ? L.pstate : L.cstate;
    for (const auto& t : role.states.at(st)) {
        if (t.dir == dir && t.msg == label) {
            st = t.to;
            return;
        }
    }
    throw TransportError("protocol conformance violation on link to '" + L.node_name +
                         "': " + (parent_role ? "parent" : "child") + " cannot " +
                         (dir == RoleAutomaton::Dir::Output ? "emit" : "consume") + " " +
                         label + " in state " + st);
}

std::string DeploymentRun::send_control(LinkRuntime& L, bool from_parent, MsgKind kind,
                                        Status st) {
    Message m;
    m.seq = from_parent ? L.seq_pc++ : L.seq_cp++;
    m.kind = kind;
    m.node = L.node_name;
    if (kind == MsgKind::Status) m.status = st;
    std::string line = wire_encode(m);
    L.log.lines.push_back(line);
    step_role(L, from_parent, RoleAutomaton::Dir::Output, label_of(from_parent, m));
    return line;
}

void DeploymentRun::consume_control(LinkRuntime& L, bool parent_side, const Message& m) {
    std::uint64_t& expect = parent_side ? L.expect_cp : L.expect_pc;
    if (m.seq != expect)
        throw TransportError("sequence gap on link to '" + L.node_name + "': got " +
                             std::to_string(m.seq) + ", expected " + std::to_string(expect));
    ++expect;
    step_role(L, parent_side, RoleAutomaton::Dir::Input, label_of(!parent_side, m));
}

void DeploymentRun::build() {
    auto rep = validate_topology(*d_);
    if (!rep.ok) throw Error("deployment does not validate:\n" + rep.to_text());
    if (opts_.shared_world && opts_.mode != RunMode::Lockstep)
        throw Error("shared_world is a lockstep-only option");

    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < d_->hosts.size(); ++i) idx[d_->hosts[i].id] = i;
    root_ = idx.at(rep.root_host);
    if (opts_.crashed_hosts.count(rep.root_host))
        throw Error("root host '" + rep.root_host + "' cannot be crashed");

    hosts_.resize(d_->hosts.size());
    for (std::size_t i = 0; i < d_->hosts.size(); ++i) {
        HostSpec& spec = d_->hosts[i];
        if (!spec.actions) throw Error("host '" + spec.id + "' has no action registry");
        hosts_[i].spec = &spec;
        hosts_[i].world = opts_.shared_world ? &d_->hosts[root_].world : &spec.world;
        hosts_[i].ex =
            std::make_unique<Executor>(*spec.tree, *hosts_[i].world, *spec.actions);
        hosts_[i].ex->trace_sink = &merged_;
        hosts_[i].ex->post_tick = spec.post_tick;
        std::vector<TreeNode*> remotes;
        collect_remotes(*spec.tree, remotes);
        for (TreeNode* r : remotes) {
            LinkRuntime L;
            L.parent_host = i;
            L.child_host = idx.at(r->remote_host);
            L.leaf = r;
            L.node_name = r->remote_tree;
            L.log.parent_host = spec.id;
            L.log.child_host = r->remote_host;
            L.log.leaf = r->id;
            link_by_leaf_[r] = links_.size();
            links_.push_back(std::move(L));
        }
    }
    for (std::size_t i = 0; i < d_->hosts.size(); ++i) {
        hosts_[i].ex->remote_tick = [this](TreeNode& leaf, WorldState&) {
            return proxy_tick(link_by_leaf_.at(&leaf));
        };
        hosts_[i].ex->remote_halt = [this](TreeNode& leaf) {
            proxy_halt(link_by_leaf_.at(&leaf));
        };
    }
    dt_ = hosts_[root_].world->dt();
    data_seq_.assign(d_->data_links.size(), 0);
}

Status DeploymentRun::tick_host(std::size_t host) {
    HostRuntime& h = hosts_[host];
    if (h.in_tick)
        throw TransportError("host '" + h.spec->id + "' ticked while already ticking");
    h.in_tick = true;
    Status s;
    try {
        s = h.ex->tick_once();
    } catch (...) {
        h.in_tick = false;
        throw;
    }
    h.in_tick = false;
    propagate_ports(host);
    return s;
}

void DeploymentRun::propagate_ports(std::size_t host) {
    HostRuntime& h = hosts_[host];
    for (std::size_t li = 0; li < d_->data_links.size(); ++li) {
        const DataLink& link = d_->data_links[li];
        if (link.from_host != h.spec->id) continue;
        const DataPortSpec* port = nullptr;
        for (const auto& p : h.spec->ports)
            if (p.name == link.from_port) port = &p;
        if (!port) continue;
        const Value v = h.world->get(port->variable);
        auto it = h.last_sent.find(li);
        if (it != h.last_sent.end() && it->second == v) continue;
        h.last_sent.insert_or_assign(li, v);

        Message m;
        m.kind = MsgKind::Data;
        m.node = port->name;
        m.data = v;
        m.seq = data_seq_[li]++;  // gap-free per data link
        std::string line = wire_encode(m);
        if (opts_.mode == RunMode::Lockstep) {
            Event ev;
            ev.kind = Event::DataDeliver;
            ev.link = li;
            ev.line = line;
            deliver(ev);
        } else {
            Event ev;
            ev.time = now_ + delay();
            ev.order = event_order_++;
            ev.kind = Event::DataDeliver;
            ev.link = li;
            ev.line = line;
            queue_.push(std::move(ev));
        }
    }
}

Status DeploymentRun::proxy_tick(std::size_t link) {
    LinkRuntime& L = links_[link];
    if (opts_.mode == RunMode::Lockstep) {
        if (L.outstanding)
            throw TransportError("TICK sent on link to '" + L.node_name +
                                 "' while one is outstanding");
        L.outstanding = true;
        std::string line = send_control(L, true, MsgKind::Tick);
        Status s;
        try {
            consume_control(L, false, wire_decode(line));
            s = tick_host(L.child_host);
            std::string reply = send_control(L, false, MsgKind::Status, s);
            consume_control(L, true, wire_decode(reply));
        } catch (...) {
            L.outstanding = false;
            throw;
        }
        L.outstanding = false;
        L.last_status = s;
        return s;
    }

    // async: never block — return the last known status, keep at most one
    // request in flight, and fail the link after the timeout
    if (L.failed) return Status::Failure;
    if (L.outstanding) {
        if (now_ - L.sent_time > opts_.timeout_factor * dt_) {
            L.failed = true;
            return Status::Failure;
        }
        return L.last_status;
    }
    Event ev;
    ev.time = now_ + delay();
    ev.order = event_order_++;
    ev.kind = Event::ToChild;
    ev.link = link;
    ev.line = send_control(L, true, MsgKind::Tick);
    queue_.push(std::move(ev));
    L.outstanding = true;
    L.sent_time = now_;
    return L.last_status;
}

void DeploymentRun::proxy_halt(std::size_t link) {
    LinkRuntime& L = links_[link];
    if (opts_.mode == RunMode::Lockstep) {
        std::string line = send_control(L, true, MsgKind::Halt);
        consume_control(L, false, wire_decode(line));
        hosts_[L.child_host].ex->halt();
        std::string reply = send_control(L, false, MsgKind::Halt);
        consume_control(L, true, wire_decode(reply));
        L.last_status = Status::Running;
        return;
    }
    if (L.failed) return;
    if (L.outstanding) {
        L.pending_halt = true;  // the protocol halts only between exchanges
        return;
    }
    Event ev;
    ev.time = now_ + delay();
    ev.order = event_order_++;
    ev.kind = Event::ToChild;
    ev.link = link;
    ev.line = send_control(L, true, MsgKind::Halt);
    queue_.push(std::move(ev));
    L.last_status = Status::Running;
}

void DeploymentRun::deliver(const Event& ev) {
    if (ev.kind == Event::DataDeliver) {
        const DataLink& dl = d_->data_links[ev.link];
        Message m = wire_decode(ev.line);
        for (std::size_t i = 0; i < d_->hosts.size(); ++i) {
            if (d_->hosts[i].id != dl.to_host) continue;
            if (opts_.crashed_hosts.count(dl.to_host)) return;
            for (const auto& p : d_->hosts[i].ports)
                if (p.name == dl.to_port) hosts_[i].world->set(p.variable, *m.data);
        }
        return;
    }

    LinkRuntime& L = links_[ev.link];
    Message m = wire_decode(ev.line);
    if (ev.kind == Event::ToChild) {
        if (opts_.crashed_hosts.count(hosts_[L.child_host].spec->id)) return;
        consume_control(L, false, m);
        if (m.kind == MsgKind::Tick) {
            Status s = tick_host(L.child_host);
            Event back;
            back.time = now_ + delay();
            back.order = event_order_++;
            back.kind = Event::ToParent;
            back.link = ev.link;
            back.line = send_control(L, false, MsgKind::Status, s);
            queue_.push(std::move(back));
        } else {  // HALT
            hosts_[L.child_host].ex->halt();
            Event back;
            back.time = now_ + delay();
            back.order = event_order_++;
            back.kind = Event::ToParent;
            back.link = ev.link;
            back.line = send_control(L, false, MsgKind::Halt);
            queue_.push(std::move(back));
        }
        return;
    }

    // ToParent
    if (L.failed) return;  // stale reply after a declared transport failure
    consume_control(L, true, m);
    if (m.kind == MsgKind::Status) {
        L.last_status = *m.status;
        L.leaf->action_running = (*m.status == Status::Running);
        L.outstanding = false;
        if (L.pending_halt) {
            L.pending_halt = false;
            if (*m.status == Status::Running) {
                Event ev2;
                ev2.time = now_ + delay();
                ev2.order = event_order_++;
                ev2.kind = Event::ToChild;
                ev2.link = ev.link;
                ev2.line = send_control(L, true, MsgKind::Halt);
                queue_.push(std::move(ev2));
                L.last_status = Status::Running;
            }
        }
    }
    // HALT_ACK needs no action beyond the monitor step
}

void DeploymentRun::process_events_until(double t) {
    while (!queue_.empty() && queue_.top().time <= t + 1e-12) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        deliver(ev);
    }
    now_ = t;
}

DeployResult DeploymentRun::run() {
    build();
    for (int k = 0; k < opts_.max_ticks; ++k) {
        if (opts_.mode == RunMode::Async) process_events_until(k * dt_);
        Status s = tick_host(root_);
        res_.root_status_per_tick.push_back(s);
        res_.status = s;
        ++res_.ticks;
        if (s == Status::Success) break;
        if (opts_.stop_on_failure && s == Status::Failure) break;
    }
    res_.trace = std::move(merged_);
    for (std::size_t i = 0; i < hosts_.size(); ++i)
        res_.final_worlds.emplace(hosts_[i].spec->id, *hosts_[i].world);
    for (auto& L : links_) res_.link_logs.push_back(L.log);
    return std::move(res_);
}

}  // namespace

DeployResult run_deployment(Deployment& d, const DeployOptions& opts) {
    DeploymentRun run(d, opts);
    return run.run();
}

}  // namespace btweave
