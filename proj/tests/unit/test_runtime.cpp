#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <random>
#include <thread>

#include "btweave/btsync.hpp"
#include "btweave/errors.hpp"
#include "btweave/runtime.hpp"
#include "support/ref_eval.hpp"

using namespace btweave;

namespace {

// --- wire oracle -----------------------------------------------------------
// Renders a message by hand, straight from the documented line grammar, with
// its own escaper. wire_encode must agree with this byte for byte.
std::string oracle_escape(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (c == '%' || c == '=' || c == ' ' || c < 0x20 || c == 0x7f) {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xf];
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string oracle_encode(const Message& m) {
    std::string out = "seq=" + std::to_string(m.seq);
    out += " kind=";
    switch (m.kind) {
        case MsgKind::Tick: out += "TICK"; break;
        case MsgKind::Halt: out += "HALT"; break;
        case MsgKind::Status: out += "STATUS"; break;
        case MsgKind::Data: out += "DATA"; break;
    }
    out += " node=" + oracle_escape(m.node);
    if (m.kind == MsgKind::Status) {
        out += " status=";
        out += to_char(*m.status);
    }
    if (m.kind == MsgKind::Data) {
        const Value& v = *m.data;
        std::string ty, text;
        switch (v.type()) {
            case ValueType::Bool:
                ty = "bool";
                text = v.as_bool() ? "true" : "false";
                break;
            case ValueType::Int:
                ty = "int";
                text = std::to_string(v.as_int());
                break;
            case ValueType::Real:
                ty = v.unit().empty() ? "real" : "real:" + oracle_escape(v.unit());
                text = format_real(v.as_real());
                break;
            case ValueType::String:
                ty = "string";
                text = v.as_text();
                break;
            case ValueType::Enum:
                ty = "enum";
                text = v.as_text();
                break;
        }
        out += " type=" + ty;
        out += " value=" + oracle_escape(text);
    }
    out += "\n";
    return out;
}

std::string rand_text(std::mt19937_64& rng) {
    static const std::string pool =
        "abcxyz019 =%:._-\t"
        "\x01\x7f";
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::string s;
    int n = len(rng);
    for (int i = 0; i < n; ++i) s += pool[pick(rng)];
    return s;
}

Message rand_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind(0, 3);
    std::uniform_int_distribution<std::uint64_t> seq;
    Message m;
    m.seq = seq(rng);
    m.node = "n" + rand_text(rng);
    switch (kind(rng)) {
        case 0: m.kind = MsgKind::Tick; break;
        case 1: m.kind = MsgKind::Halt; break;
        case 2: {
            m.kind = MsgKind::Status;
            int s = kind(rng) % 3;
            m.status = s == 0 ? Status::Running : s == 1 ? Status::Success : Status::Failure;
            break;
        }
        default: {
            m.kind = MsgKind::Data;
            switch (kind(rng)) {
                case 0: m.data = Value::boolean(kind(rng) % 2 == 0); break;
                case 1:
                    m.data = Value::integer(static_cast<std::int64_t>(seq(rng)) / 3);
                    break;
                case 2: {
                    std::uniform_real_distribution<double> re(-1e6, 1e6);
                    m.data = Value::real(re(rng), kind(rng) % 2 ? "mm" : "");
                    break;
                }
                default:
                    m.data = kind(rng) % 2 ? Value::string(rand_text(rng))
                                           : Value::symbol("sym" + std::to_string(kind(rng)));
            }
        }
    }
    return m;
}

// --- deployment scaffolding --------------------------------------------------
HostSpec make_host(std::string id, std::string tree_name, TreeNodePtr tree, WorldState w,
                   const ActionRegistry* reg) {
    HostSpec h;
    h.id = std::move(id);
    h.tree_name = std::move(tree_name);
    h.tree = std::move(tree);
    h.world = std::move(w);
    h.actions = reg;
    return h;
}

const ActionRegistry& empty_registry() {
    static ActionRegistry reg;
    return reg;
}

// counter action: bumps `v` once per Running tick, Success once v >= limit
ActionRegistry bump_registry(int limit) {
    ActionRegistry reg;
    reg.add(ActionImpl{
        "bump",
        [limit](WorldState& w, const Params&) {
            std::int64_t v = w.get("v").as_int();
            if (v >= limit) return Status::Success;
            w.set("v", Value::integer(v + 1));
            return Status::Running;
        },
        nullptr,
    });
    return reg;
}

// Rebuilds the per-link emit/consume label sequence from a link log and
// replays it on the builtin role pair. Every run must replay cleanly; the
// only wire-level ambiguity (HALT vs its ack) resolves by strict alternation.
void replay_link_log(const LinkLog& log) {
    const auto [parent, child] = builtin_roles();
    std::vector<std::string> labels;
    bool halt_open = false;
    std::uint64_t next_pc = 0, next_cp = 0;
    for (const std::string& line : log.lines) {
        Message m = wire_decode(line);
        bool from_parent;
        std::string label;
        switch (m.kind) {
            case MsgKind::Tick:
                from_parent = true;
                label = "TICK";
                break;
            case MsgKind::Status:
                from_parent = false;
                label = std::string("STATUS_") + to_char(*m.status);
                break;
            case MsgKind::Halt:
                from_parent = !halt_open;
                label = halt_open ? "HALT_ACK" : "HALT";
                halt_open = !halt_open;
                break;
            default: throw Error("DATA line in a control log");
        }
        std::uint64_t& next = from_parent ? next_pc : next_cp;
        CHECK(m.seq == next);
        ++next;
        labels.push_back((from_parent ? "parent!" : "child!") + label);
        labels.push_back((from_parent ? "child?" : "parent?") + label);
    }
    CHECK_NOTHROW(replay_witness(parent, child, labels));
}

}  // namespace

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

TEST_CASE("wire: golden lines") {
    Message m;
    m.seq = 7;
    m.kind = MsgKind::Status;
    m.node = "axis";
    m.status = Status::Success;
    CHECK(wire_encode(m) == "seq=7 kind=STATUS node=axis status=S\n");

    Message t;
    t.seq = 0;
    t.kind = MsgKind::Tick;
    t.node = "move";
    CHECK(wire_encode(t) == "seq=0 kind=TICK node=move\n");

    Message d;
    d.seq = 3;
    d.kind = MsgKind::Data;
    d.node = "pos_out";
    d.data = Value::real(1.5, "mm");
    CHECK(wire_encode(d) == "seq=3 kind=DATA node=pos_out type=real:mm value=1.5\n");

    CHECK(wire_decode("seq=7 kind=STATUS node=axis status=S\n") == m);
    CHECK(wire_decode("seq=7 kind=STATUS node=axis status=S") == m);  // newline optional
}

TEST_CASE("wire: field payloads are percent-escaped") {
    Message m;
    m.seq = 1;
    m.kind = MsgKind::Data;
    m.node = "a b=c%d";
    m.data = Value::string("x y");
    const std::string line = wire_encode(m);
    CHECK(line == "seq=1 kind=DATA node=a%20b%3Dc%25d type=string value=x%20y\n");
    CHECK(wire_decode(line) == m);
}

TEST_CASE("wire: random round-trips are the identity, bytes and values") {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 3000; ++i) {
        Message m = rand_message(rng);
        const std::string expect = oracle_encode(m);
        const std::string line = wire_encode(m);
        REQUIRE(line == expect);                    // agrees with the grammar oracle
        REQUIRE(wire_decode(line) == m);            // decode . encode = id
        REQUIRE(wire_encode(wire_decode(line)) == line);  // encode . decode = id
    }
}

TEST_CASE("wire: truncation, reordering and garbage raise DecodeError") {
    const std::string line = "seq=7 kind=STATUS node=axis status=S\n";
    CHECK(wire_decode(line.substr(0, line.size() - 1)).node == "axis");
    for (std::size_t len = 0; len + 2 <= line.size(); ++len)
        CHECK_THROWS_AS(wire_decode(line.substr(0, len)), DecodeError);

    // offsets are 0-based byte positions into the line
    try {
        wire_decode("seq=7 kind=WHAT node=axis");
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset == 11);  // start of the bad kind token
    }
    try {
        wire_decode("kind=TICK seq=7 node=x");
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset == 0);  // fields are order-strict
    }
    CHECK_THROWS_AS(wire_decode("seq=7 kind=TICK node=axis extra=1"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=-1 kind=TICK node=axis"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=7 kind=TICK node=a%zz"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=7 kind=STATUS node=axis status=Q"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=7 kind=DATA node=p type=real value=abc"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=7 kind=DATA node=p type=blob value=x"), DecodeError);
    CHECK_THROWS_AS(wire_decode("seq=1 kind=TICK node=a\nseq=2 kind=TICK node=b"),
                    DecodeError);
}

// ---------------------------------------------------------------------------
// Topology validation
// ---------------------------------------------------------------------------

namespace {

// hosts a -> b -> c, one remote leaf per parent
Deployment chain_deployment() {
    Deployment d;
    d.hosts.push_back(make_host("a", "ta", TreeNode::remote("ra", "b", "tb"), WorldState(),
                                &empty_registry()));
    d.hosts.push_back(make_host("b", "tb", TreeNode::remote("rb", "c", "tc"), WorldState(),
                                &empty_registry()));
    d.hosts.push_back(make_host("c", "tc", TreeNode::condition("cc", parse_condition("ok == true")),
                                WorldState(), &empty_registry()));
    d.hosts[2].world.declare("ok", Value::boolean(true));
    return d;
}

bool has_violation(const ValidationReport& rep, const std::string& needle) {
    for (const auto& v : rep.violations)
        if (v.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("topology: a three-host chain is valid with root a") {
    Deployment d = chain_deployment();
    ValidationReport rep = validate_topology(d);
    CHECK(rep.ok);
    CHECK(rep.violations.empty());
    CHECK(rep.root_host == "a");
    CHECK(rep.to_text() == "topology: valid\nroot host: a\n");
}

TEST_CASE("topology: a control cycle is flagged with the cycle listed") {
    Deployment d;
    d.hosts.push_back(make_host("a", "ta", TreeNode::remote("ra", "b", "tb"), WorldState(),
                                &empty_registry()));
    d.hosts.push_back(make_host("b", "tb", TreeNode::remote("rb", "a", "ta"), WorldState(),
                                &empty_registry()));
    ValidationReport rep = validate_topology(d);
    CHECK_FALSE(rep.ok);
    CHECK(has_violation(rep, "control cycle: a -> b -> a"));
    CHECK_THROWS_WITH_AS(run_deployment(d), doctest::Contains("control cycle"), Error);
}

TEST_CASE("topology: data ports attach to leaves only") {
    Deployment d = chain_deployment();
    // hang the port off host c's root... which is a leaf; build a composite first
    std::vector<TreeNodePtr> kids;
    kids.push_back(std::move(d.hosts[2].tree));
    d.hosts[2].tree = TreeNode::sequence("seq_c", std::move(kids));
    d.hosts[2].world.declare("pos", Value::real(0.0, "mm"));
    d.hosts[2].ports.push_back({"p_out", "seq_c", "pos", ValueType::Real, "mm", true});
    ValidationReport rep = validate_topology(d);
    CHECK_FALSE(rep.ok);
    CHECK(has_violation(rep, "non-leaf"));
    CHECK(has_violation(rep, "leaves only"));

    d.hosts[2].ports[0].node = "cc";  // a condition leaf is fine
    CHECK(validate_topology(d).ok);
}

TEST_CASE("topology: structural violations are each reported") {
    SUBCASE("two roots") {
        Deployment d;
        d.hosts.push_back(make_host("a", "ta", TreeNode::condition("c1", Condition{}),
                                    WorldState(), &empty_registry()));
        d.hosts.push_back(make_host("b", "tb", TreeNode::condition("c2", Condition{}),
                                    WorldState(), &empty_registry()));
        ValidationReport rep = validate_topology(d);
        CHECK_FALSE(rep.ok);
        CHECK(has_violation(rep, "2 roots: a, b"));
    }
    SUBCASE("duplicate parent endpoints") {
        Deployment d = chain_deployment();
        // a gains a second leaf ticking c, so c has parents a and b
        std::vector<TreeNodePtr> kids;
        kids.push_back(std::move(d.hosts[0].tree));
        kids.push_back(TreeNode::remote("ra2", "c", "tc"));
        d.hosts[0].tree = TreeNode::sequence("sa", std::move(kids));
        ValidationReport rep = validate_topology(d);
        CHECK_FALSE(rep.ok);
        CHECK(has_violation(rep, "host 'c' has 2 parent endpoints"));
    }
    SUBCASE("unknown remote host and tree") {
        Deployment d = chain_deployment();
        d.hosts[1].tree = TreeNode::remote("rb", "nowhere", "tc");
        ValidationReport rep = validate_topology(d);
        CHECK(has_violation(rep, "unknown host 'nowhere'"));
        d.hosts[1].tree = TreeNode::remote("rb", "c", "wrong");
        rep = validate_topology(d);
        CHECK(has_violation(rep, "unknown tree 'c.wrong'"));
    }
    SUBCASE("self-tick") {
        Deployment d;
        d.hosts.push_back(make_host("a", "ta", TreeNode::remote("ra", "a", "ta"),
                                    WorldState(), &empty_registry()));
        CHECK(has_violation(validate_topology(d), "ticks its own host"));
    }
    SUBCASE("duplicate host id") {
        Deployment d;
        d.hosts.push_back(make_host("a", "ta", TreeNode::condition("c1", Condition{}),
                                    WorldState(), &empty_registry()));
        d.hosts.push_back(make_host("a", "tb", TreeNode::condition("c2", Condition{}),
                                    WorldState(), &empty_registry()));
        CHECK(has_violation(validate_topology(d), "duplicate host id 'a'"));
    }
    SUBCASE("port type must match the bound variable") {
        Deployment d = chain_deployment();
        d.hosts[2].world.declare("pos", Value::real(0.0, "mm"));
        d.hosts[2].ports.push_back({"p", "cc", "pos", ValueType::Real, "deg", true});
        CHECK(has_violation(validate_topology(d), "type real:deg does not match"));
        d.hosts[2].ports[0] = {"p", "cc", "missing", ValueType::Real, "mm", true};
        CHECK(has_violation(validate_topology(d), "unknown variable 'missing'"));
    }
    SUBCASE("data links must be out -> in and type-equal") {
        Deployment d = chain_deployment();
        d.hosts[2].world.declare("pos", Value::real(0.0, "mm"));
        d.hosts[2].ports.push_back({"p_out", "cc", "pos", ValueType::Real, "mm", true});
        d.hosts[1].world.declare("pos_in", Value::integer(0));
        d.hosts[1].ports.push_back({"p_in", "rb", "pos_in", ValueType::Int, "", false});
        d.data_links.push_back({"c", "p_out", "b", "p_in"});
        ValidationReport rep = validate_topology(d);
        CHECK(has_violation(rep, "type real:mm does not match int"));
        d.data_links[0] = {"b", "p_in", "c", "p_out"};  // backwards
        rep = validate_topology(d);
        CHECK(has_violation(rep, "source is not an output port"));
        d.data_links[0] = {"c", "nope", "b", "p_in"};
        CHECK(has_violation(validate_topology(d), "references an unknown port"));
    }
}

// ---------------------------------------------------------------------------
// Data bus
// ---------------------------------------------------------------------------

TEST_CASE("data bus: last-value cache with typed transfer") {
    Deployment d = chain_deployment();
    d.hosts[2].world.declare("pos", Value::real(0.0, "mm"));
    d.hosts[2].ports.push_back({"p_out", "cc", "pos", ValueType::Real, "mm", true});
    d.hosts[1].world.declare("pos_in", Value::real(0.0, "mm"));
    d.hosts[1].ports.push_back({"p_in", "rb", "pos_in", ValueType::Real, "mm", false});
    d.data_links.push_back({"c", "p_out", "b", "p_in"});
    REQUIRE(validate_topology(d).ok);

    DataBus bus(d);
    CHECK_FALSE(bus.last("b", "p_in").has_value());
    bus.transfer("c", "p_out", Value::real(42.0, "mm"));
    REQUIRE(bus.last("b", "p_in").has_value());
    CHECK(bus.last("b", "p_in")->as_real() == 42.0);

    // last-value semantics: two pushes before one read -> the later value
    bus.transfer("c", "p_out", Value::real(1.0, "mm"));
    bus.transfer("c", "p_out", Value::real(2.0, "mm"));
    CHECK(bus.last("b", "p_in")->as_real() == 2.0);

    CHECK_THROWS_AS(bus.transfer("c", "p_out", Value::string("oops")), TypeMismatchError);
    CHECK_THROWS_AS(bus.transfer("c", "gone", Value::real(0.0, "mm")), UnlinkedPortError);
    CHECK_THROWS_AS(bus.transfer("b", "p_in", Value::real(0.0, "mm")), Error);
}

TEST_CASE("data bus: an output port without a link is unlinked") {
    Deployment d = chain_deployment();
    d.hosts[2].world.declare("pos", Value::real(0.0, "mm"));
    d.hosts[2].ports.push_back({"p_out", "cc", "pos", ValueType::Real, "mm", true});
    DataBus bus(d);
    CHECK_THROWS_AS(bus.transfer("c", "p_out", Value::real(1.0, "mm")), UnlinkedPortError);
}

// ---------------------------------------------------------------------------
// Lockstep deployment runs
// ---------------------------------------------------------------------------

TEST_CASE("lockstep: a single-host deployment reproduces the local trace exactly") {
    ActionRegistry reg = bump_registry(3);
    WorldState w;
    w.declare("v", Value::integer(0));

    TreeNodePtr local = TreeNode::action("go", "bump", {});
    WorldState wl = w;
    Executor ex(*local, wl, reg);
    std::vector<Status> local_status;
    for (int k = 0; k < 10; ++k) {
        Status s = ex.tick_once();
        local_status.push_back(s);
        if (s != Status::Running) break;
    }

    Deployment d;
    d.hosts.push_back(make_host("solo", "main", TreeNode::action("go", "bump", {}), w, &reg));
    DeployOptions opts;
    opts.max_ticks = 10;
    DeployResult res = run_deployment(d, opts);

    CHECK(res.status == Status::Success);
    CHECK(res.root_status_per_tick == local_status);
    CHECK(res.trace == ex.trace());
    CHECK(res.trace.to_text() == ex.trace().to_text());
    CHECK(res.link_logs.empty());
    CHECK(res.final_worlds.at("solo").get("v").as_int() == 3);
}

namespace {

// Splits one random tree at one edge: the subtree under `victim` moves to a
// child host and the edge becomes a remote leaf. Returns the child subtree.
TreeNodePtr split_at(TreeNode& root, int victim, const std::string& child_host,
                     const std::string& child_tree) {
    int counter = 0;
    std::function<TreeNodePtr(TreeNode&)> walk = [&](TreeNode& n) -> TreeNodePtr {
        for (auto& c : n.children) {
            if (counter++ == victim) {
                TreeNodePtr taken = std::move(c);
                c = TreeNode::remote(taken->id + "_remote", child_host, child_tree);
                return taken;
            }
            if (TreeNodePtr t = walk(*c)) return t;
        }
        return nullptr;
    };
    return walk(root);
}

int count_edges(const TreeNode& n) {
    int edges = 0;
    for (const auto& c : n.children) edges += 1 + count_edges(*c);
    return edges;
}

}  // namespace

TEST_CASE("lockstep: random single-edge splits preserve the per-tick root status") {
    testsupport::TreeGen gen(77);
    int split_trees = 0;
    for (int trial = 0; trial < 60; ++trial) {
        auto g = gen.tree(3);
        const int edges = count_edges(*g.root);
        if (edges == 0) continue;  // a bare leaf has no edge to split
        ++split_trees;
        const int victim = gen.irand(0, edges - 1);
        WorldState w0 = gen.world();

        // undistributed reference run
        TreeNodePtr whole = g.root->clone();
        WorldState w_ref = w0;
        Executor ref(*whole, w_ref, g.registry);
        std::vector<Status> expect;
        for (int k = 0; k < 25; ++k) {
            Status s = ref.tick_once();
            expect.push_back(s);
            if (s != Status::Running) break;
        }

        // the same tree split across two hosts, one shared blackboard
        TreeNodePtr sub = split_at(*g.root, victim, "leafdev", "sub");
        REQUIRE(sub);
        Deployment d;
        d.hosts.push_back(make_host("rootdev", "main", std::move(g.root), w0, &g.registry));
        d.hosts.push_back(
            make_host("leafdev", "sub", std::move(sub), WorldState(), &g.registry));
        DeployOptions opts;
        opts.max_ticks = 25;
        opts.shared_world = true;
        DeployResult res = run_deployment(d, opts);

        REQUIRE(res.root_status_per_tick == expect);
        for (const LinkLog& log : res.link_logs) replay_link_log(log);
    }
    CHECK(split_trees >= 30);  // the generator must actually exercise splits
}

TEST_CASE("lockstep: data ports feed a remote condition through the plant loop") {
    ActionRegistry reg;  // conditions only
    WorldState base_w;
    base_w.declare("pos", Value::real(0.0, "mm"));
    WorldState axis_w;
    axis_w.declare("pos_in", Value::real(0.0, "mm"));

    Deployment d;
    d.hosts.push_back(
        make_host("base", "main", TreeNode::remote("r", "axis", "sub"), base_w, &reg));
    d.hosts.push_back(make_host("axis", "sub",
                                TreeNode::condition("c", parse_condition("pos_in >= 2")),
                                axis_w, &reg));
    d.hosts[0].ports.push_back({"p_out", "r", "pos", ValueType::Real, "mm", true});
    d.hosts[1].ports.push_back({"p_in", "c", "pos_in", ValueType::Real, "mm", false});
    d.data_links.push_back({"base", "p_out", "axis", "p_in"});
    d.hosts[0].post_tick = [](WorldState& w) {
        w.set("pos", Value::real(w.get("pos").as_real() + 1.0, "mm"));
    };
    REQUIRE(validate_topology(d).ok);

    DeployOptions opts;
    opts.max_ticks = 10;
    opts.stop_on_failure = false;
    DeployResult res = run_deployment(d, opts);

    // pos moves 0 -> 1 -> 2 after ticks 0 and 1; the condition sees each value
    // one tick later via the data link
    CHECK(res.root_status_per_tick ==
          std::vector<Status>{Status::Failure, Status::Failure, Status::Success});
    CHECK(res.status == Status::Success);
    CHECK(res.final_worlds.at("axis").get("pos_in").as_real() == 3.0);

    REQUIRE(res.link_logs.size() == 1);
    replay_link_log(res.link_logs[0]);
    CHECK(res.link_logs[0].lines.size() == 6);  // three TICK/STATUS exchanges
}

TEST_CASE("lockstep: deleting data links never changes control statuses") {
    ActionRegistry reg = bump_registry(4);
    WorldState base_w;
    base_w.declare("pos", Value::real(0.0, "mm"));
    WorldState axis_w;
    axis_w.declare("v", Value::integer(0));
    axis_w.declare("scratch", Value::real(0.0, "mm"));

    auto build = [&](bool with_links) {
        Deployment d;
        d.hosts.push_back(
            make_host("base", "main", TreeNode::remote("r", "axis", "sub"), base_w, &reg));
        d.hosts.push_back(
            make_host("axis", "sub", TreeNode::action("go", "bump", {}), axis_w, &reg));
        d.hosts[0].ports.push_back({"p_out", "r", "pos", ValueType::Real, "mm", true});
        d.hosts[1].ports.push_back({"p_in", "go", "scratch", ValueType::Real, "mm", false});
        if (with_links) d.data_links.push_back({"base", "p_out", "axis", "p_in"});
        d.hosts[0].post_tick = [](WorldState& w) {
            w.set("pos", Value::real(w.get("pos").as_real() + 0.5, "mm"));
        };
        return d;
    };

    DeployOptions opts;
    opts.max_ticks = 12;
    Deployment with = build(true);
    Deployment without = build(false);
    DeployResult a = run_deployment(with, opts);
    DeployResult b = run_deployment(without, opts);
    CHECK(a.root_status_per_tick == b.root_status_per_tick);
    CHECK(a.trace == b.trace);
    // the data did flow in the linked run
    CHECK(a.final_worlds.at("axis").get("scratch").as_real() > 0.0);
    CHECK(b.final_worlds.at("axis").get("scratch").as_real() == 0.0);
}

TEST_CASE("lockstep: preemption of a running remote subtree travels as HALT") {
    ActionRegistry reg;
    reg.add(ActionImpl{
        "spin",
        [](WorldState& w, const Params&) {
            w.set("spins", Value::integer(w.get("spins").as_int() + 1));
            return Status::Running;
        },
        [](WorldState& w, const Params&) { w.set("halted", Value::boolean(true)); },
    });
    reg.add(ActionImpl{
        "alt",
        [](WorldState&, const Params&) { return Status::Success; },
        nullptr,
    });

    WorldState base_w;
    base_w.declare("go", Value::boolean(true));
    WorldState axis_w;
    axis_w.declare("spins", Value::integer(0));
    axis_w.declare("halted", Value::boolean(false));

    std::vector<TreeNodePtr> seq_kids;
    seq_kids.push_back(TreeNode::condition("ok", parse_condition("go == true")));
    seq_kids.push_back(TreeNode::remote("r", "axis", "sub"));
    std::vector<TreeNodePtr> fb_kids;
    fb_kids.push_back(TreeNode::sequence("s", std::move(seq_kids)));
    fb_kids.push_back(TreeNode::action("fix", "alt", {}));

    Deployment d;
    d.hosts.push_back(make_host("base", "main",
                                TreeNode::fallback("f", std::move(fb_kids)), base_w, &reg));
    d.hosts.push_back(
        make_host("axis", "sub", TreeNode::action("work", "spin", {}), axis_w, &reg));
    d.hosts[0].post_tick = [](WorldState& w) {
        if (w.clock() >= 2.0) w.set("go", Value::boolean(false));
    };

    DeployOptions opts;
    opts.max_ticks = 10;
    DeployResult res = run_deployment(d, opts);

    CHECK(res.root_status_per_tick ==
          std::vector<Status>{Status::Running, Status::Running, Status::Success});
    CHECK(res.final_worlds.at("axis").get("halted").as_bool() == true);
    CHECK(res.final_worlds.at("axis").get("spins").as_int() == 2);

    REQUIRE(res.link_logs.size() == 1);
    const auto& lines = res.link_logs[0].lines;
    REQUIRE(lines.size() == 6);  // TICK S_R TICK S_R HALT HALT_ACK
    CHECK(wire_decode(lines[4]).kind == MsgKind::Halt);
    CHECK(wire_decode(lines[5]).kind == MsgKind::Halt);
    replay_link_log(res.link_logs[0]);
}

TEST_CASE("deployment option misuse is rejected up front") {
    ActionRegistry reg = bump_registry(2);
    WorldState w;
    w.declare("v", Value::integer(0));
    Deployment d;
    d.hosts.push_back(make_host("solo", "main", TreeNode::action("go", "bump", {}), w, &reg));

    DeployOptions opts;
    opts.shared_world = true;
    opts.mode = RunMode::Async;
    CHECK_THROWS_WITH_AS(run_deployment(d, opts), doctest::Contains("lockstep-only"), Error);

    DeployOptions crash;
    crash.crashed_hosts = {"solo"};
    CHECK_THROWS_WITH_AS(run_deployment(d, crash), doctest::Contains("cannot be crashed"),
                         Error);
}

// ---------------------------------------------------------------------------
// Async deployment runs
// ---------------------------------------------------------------------------

TEST_CASE("async: a healthy child completes, stale statuses never block the root") {
    ActionRegistry reg = bump_registry(3);
    WorldState axis_w;
    axis_w.declare("v", Value::integer(0));

    Deployment d;
    d.hosts.push_back(make_host("base", "main", TreeNode::remote("r", "axis", "sub"),
                                WorldState(), &empty_registry()));
    d.hosts[0].actions = &reg;
    d.hosts.push_back(
        make_host("axis", "sub", TreeNode::action("go", "bump", {}), axis_w, &reg));

    DeployOptions opts;
    opts.mode = RunMode::Async;
    opts.max_ticks = 60;
    opts.seed = 5;
    DeployResult res = run_deployment(d, opts);

    CHECK(res.status == Status::Success);
    CHECK(res.final_worlds.at("axis").get("v").as_int() == 3);
    // staleness: the root keeps ticking Running while exchanges are in flight
    CHECK(res.ticks > 4);
    REQUIRE(res.link_logs.size() == 1);
    replay_link_log(res.link_logs[0]);
}

TEST_CASE("async: a crashed child times out and the fallback takes its alternative") {
    ActionRegistry reg;
    reg.add(ActionImpl{
        "alt",
        [](WorldState&, const Params&) { return Status::Success; },
        nullptr,
    });
    WorldState axis_w;
    axis_w.declare("v", Value::integer(0));
    ActionRegistry axis_reg = bump_registry(1000);

    std::vector<TreeNodePtr> fb_kids;
    fb_kids.push_back(TreeNode::remote("r", "axis", "sub"));
    fb_kids.push_back(TreeNode::action("fix", "alt", {}));

    Deployment d;
    d.hosts.push_back(make_host("base", "main",
                                TreeNode::fallback("f", std::move(fb_kids)), WorldState(),
                                &reg));
    d.hosts.push_back(
        make_host("axis", "sub", TreeNode::action("go", "bump", {}), axis_w, &axis_reg));

    DeployOptions opts;
    opts.mode = RunMode::Async;
    opts.max_ticks = 30;
    opts.seed = 9;
    opts.timeout_factor = 3.0;
    opts.crashed_hosts = {"axis"};
    DeployResult res = run_deployment(d, opts);

    CHECK(res.status == Status::Success);
    CHECK(res.ticks >= 4);  // Running until the timeout T = 3 * dt expires
    CHECK(res.final_worlds.at("axis").get("v").as_int() == 0);  // never reached
    REQUIRE(res.link_logs.size() == 1);
    REQUIRE(res.link_logs[0].lines.size() == 1);  // one TICK, never re-sent
    CHECK(wire_decode(res.link_logs[0].lines[0]).kind == MsgKind::Tick);
}

TEST_CASE("async: runs are deterministic per seed and vary across seeds") {
    auto run_once = [](std::uint64_t seed) {
        ActionRegistry reg = bump_registry(3);
        WorldState axis_w;
        axis_w.declare("v", Value::integer(0));
        Deployment d;
        d.hosts.push_back(make_host("base", "main", TreeNode::remote("r", "axis", "sub"),
                                    WorldState(), &reg));
        d.hosts.push_back(
            make_host("axis", "sub", TreeNode::action("go", "bump", {}), axis_w, &reg));
        DeployOptions opts;
        opts.mode = RunMode::Async;
        opts.max_ticks = 60;
        opts.seed = seed;
        opts.delay_max = 1.9;  // spread exchanges over one to four ticks
        DeployResult res = run_deployment(d, opts);
        REQUIRE(res.status == Status::Success);
        return res.ticks;
    };
    CHECK(run_once(11) == run_once(11));
    bool differs = false;
    for (std::uint64_t s = 1; s < 12 && !differs; ++s)
        differs = run_once(s) != run_once(11);
    CHECK(differs);
}

// ---------------------------------------------------------------------------
// Stream-socket transport
// ---------------------------------------------------------------------------

TEST_CASE("tcp: wire lines survive a localhost request/reply loop") {
    TcpServer server("127.0.0.1:0");
    REQUIRE(server.port() > 0);

    std::size_t served = 0;
    std::thread listener([&] {
        served = server.serve_one([](const std::string& line) {
            Message m = wire_decode(line);
            Message reply;
            reply.seq = m.seq;
            reply.kind = MsgKind::Status;
            reply.node = m.node;
            reply.status = Status::Success;
            return wire_encode(reply);
        });
    });

    {
        TcpClient client("127.0.0.1", server.port());
        std::mt19937_64 rng(3);
        for (std::uint64_t i = 0; i < 20; ++i) {
            Message m;
            m.seq = i;
            m.kind = MsgKind::Tick;
            m.node = "axis " + rand_text(rng);  // escaping over the socket too
            Message back = wire_decode(client.request(wire_encode(m)));
            CHECK(back.seq == i);
            CHECK(back.node == m.node);
            CHECK(back.status == Status::Success);
        }
    }  // client closes; serve_one returns

    listener.join();
    CHECK(served == 20);
}

TEST_CASE("tcp: empty bind address falls back to BTWEAVE_LISTEN") {
    setenv("BTWEAVE_LISTEN", "127.0.0.1:0", 1);
    TcpServer server("");
    CHECK(server.port() > 0);
    unsetenv("BTWEAVE_LISTEN");

    CHECK_THROWS_AS(TcpServer("not-an-address"), Error);
    CHECK_THROWS_AS(TcpClient("256.0.0.1", 1), Error);
}
