#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>
#include <string>

#include "btweave/backchain.hpp"
#include "btweave/dsl.hpp"
#include "btweave/errors.hpp"
#include "btweave/executor.hpp"
#include "btweave/plant.hpp"

using namespace btweave;

namespace {

std::string demo_text() { return demo_document_text(); }

// (line, col) of byte offset i, both 1-based, newline counting as the last
// column of its line.
std::pair<int, int> line_col(const std::string& text, std::size_t i) {
    int line = 1, col = 1;
    for (std::size_t p = 0; p < i; ++p) {
        if (text[p] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const TreeNode* find_node(const TreeNode& n, const std::string& id) {
    if (n.id == id) return &n;
    for (const auto& c : n.children)
        if (const TreeNode* hit = find_node(*c, id)) return hit;
    return nullptr;
}

}  // namespace

TEST_CASE("a minimal skill declaration parses to one skill") {
    const std::string text =
        "action move_absolute(target: real in)\n"
        "\n"
        "skill move_to_pos {\n"
        "  pre: \"power == true\"\n"
        "  post: \"pos == target\"\n"
        "  action: move_absolute\n"
        "  param target: real in\n"
        "}\n";
    Document doc = parse_document(text);
    REQUIRE(doc.skills.size() == 1);
    const SkillDecl& s = doc.skills[0];
    CHECK(s.name == "move_to_pos");
    CHECK(s.action == "move_absolute");
    CHECK(s.pre.to_string() == "power == true");
    CHECK(s.inv.empty());
    CHECK(s.post.to_string() == "pos == target");  // symbol-valued constant
    CHECK(s.priority == 0);
    REQUIRE(s.params.size() == 1);
    CHECK(s.params[0].spec.name == "target");
    CHECK(s.params[0].spec.dir == ParamDir::In);
    CHECK(s.params[0].maps_to == "target");  // defaults to the param name

    SkillRegistry reg = skills_from(doc);
    CHECK(reg.names() == std::vector<std::string>{"move_to_pos"});
    CHECK(reg.interface_of("move_to_pos").mapping.at("target") == "target");
}

TEST_CASE("declaration keywords stay usable as names") {
    Document doc = parse_document(
        "world tree {\n"
        "  var skill: bool = true\n"
        "  var host: int = 2\n"
        "}\n");
    REQUIRE(doc.worlds.size() == 1);
    CHECK(doc.worlds[0].name == "tree");
    WorldState w = instantiate_world(doc.worlds[0]);
    CHECK(w.get("skill").as_bool() == true);
    CHECK(w.get("host").as_int() == 2);
}

TEST_CASE("world variables carry their declared types, units and inits") {
    Document doc = parse_document(
        "world w {\n"
        "  var b: bool = false\n"
        "  var n: int = -3\n"
        "  var r: real = 5\n"          // int literal widens to real
        "  var d: real [deg] = 90.0\n"
        "  var s: string = \"hi\"\n"
        "  var m: enum = idle\n"
        "}\n");
    WorldState w = instantiate_world(doc.worlds[0]);
    CHECK(w.get("n").as_int() == -3);
    CHECK(w.get("r").as_real() == 5.0);
    CHECK(w.get("d").unit() == "deg");
    CHECK(w.get("s").as_text() == "hi");
    CHECK(w.get("m").as_text() == "idle");
    // widening shows up in the canonical print
    CHECK(print_document(doc).find("var r: real = 5.0") != std::string::npos);
}

TEST_CASE("demo document: declarations survive parse and reprint byte-stable") {
    const std::string text = demo_text();
    Document doc = parse_document(text);
    CHECK(print_document(doc) == text);       // shipped text is canonical
    CHECK(parse_document(print_document(doc)) == doc);

    SkillRegistry reg = skills_from(doc);
    CHECK(reg.size() == 4);
    CHECK(reg.find("move_axis_to_pos").inv.to_string() ==
          "power == true AND error == false");
    Goal g = goal_from(*doc.find_goal("demo_goal"));
    REQUIRE(g.conditions.size() == 1);
    CHECK(g.conditions[0].to_string() == "at_target == true");
}

TEST_CASE("non-canonical input normalizes once and stays fixed") {
    // interleaved declaration order, ragged whitespace, comments
    const std::string messy =
        "# a cell fragment\n"
        "tree t { sequence{ cond \"x == 1\"   as c1\n"
        "   action a() } }\n"
        "world w { var x: int = 1 }\n"
        "action a(  )   # trailing note\n"
        "goal g { \"x == 2\" }\n";
    Document doc = parse_document(messy);
    const std::string once = print_document(doc);
    CHECK(once != messy);
    Document again = parse_document(once);
    CHECK(again == doc);
    CHECK(print_document(again) == once);  // idempotent

    // categories print grouped: world, action, tree, goal
    CHECK(once.find("world w") < once.find("action a"));
    CHECK(once.find("action a") < once.find("tree t"));
    CHECK(once.find("tree t") < once.find("goal g"));
}

TEST_CASE("every node kind and literal kind round-trips structurally") {
    const std::string text =
        "world w {\n"
        "  var x: int = 0\n"
        "}\n"
        "\n"
        "action act_a(p: real in, q: int out)\n"
        "\n"
        "skill sk {\n"
        "  pre: \"x > 0\"\n"
        "  inv: \"x < 9\"\n"
        "  post: \"x == 3 AND mode == \\\"a\\\\\\\\b\\\"\"\n"
        "  action: act_a\n"
        "  priority: 2\n"
        "  param p: real in -> setpoint\n"
        "  param q: int out\n"
        "}\n"
        "\n"
        "tree t1 {\n"
        "  fallback {\n"
        "    cond \"x >= 1\" as c\n"
        "    sequence_mem {\n"
        "      skill sk(p = 1.5)\n"
        "      action act_a(p = 2.0, q = 7)\n"
        "      lookup post = \"x == 3\" as seek\n"
        "    } as mem\n"
        "    remote dev.t1 as far\n"
        "  } as root\n"
        "}\n"
        "\n"
        "goal g1 {\n"
        "  \"x == 3\"\n"
        "  \"x != 4\"\n"
        "}\n"
        "\n"
        "deployment d1 {\n"
        "  host top {\n"
        "    tree: t1\n"
        "    world: w\n"
        "    port out o1: int node c var x\n"
        "  }\n"
        "  host dev {\n"
        "    tree: t1\n"
        "    world: w\n"
        "    port in i1: int node c var x\n"
        "  }\n"
        "  link top.o1 -> dev.i1\n"
        "}\n";
    Document doc = parse_document(text);
    const std::string printed = print_document(doc);
    CHECK(parse_document(printed) == doc);
    CHECK(print_document(parse_document(printed)) == printed);

    // string constants re-escape through both layers
    CHECK(printed.find("mode == \\\"a\\\\\\\\b\\\"") != std::string::npos);
    const Condition& post = doc.skills[0].post;
    REQUIRE(post.literals().size() == 2);
    CHECK(post.literals()[1].constant == Value::string("a\\b"));

    REQUIRE(doc.trees.size() == 1);
    const NodeAst& root = doc.trees[0].root;
    CHECK(root.kind == NodeAst::Kind::Fallback);
    CHECK(root.label == "root");
    REQUIRE(root.children.size() == 3);
    CHECK(root.children[1].kind == NodeAst::Kind::SequenceMem);
    CHECK(root.children[1].children[0].bindings.at("p") == Value::real(1.5));
    CHECK(root.children[1].children[1].bindings.at("q") == Value::integer(7));
    CHECK(root.children[2].kind == NodeAst::Kind::Remote);
    CHECK(root.children[2].name == "dev");
    CHECK(root.children[2].remote_tree == "t1");
}

TEST_CASE("instantiation expands skills and adopts lookup achievers") {
    Document doc = parse_document(demo_text());
    ActionRegistry stubs = stub_actions(doc);
    CHECK(stubs.has("move_absolute"));
    CHECK(stubs.has("ask_operator"));

    TreeNodePtr axis = instantiate_tree(*doc.find_tree("axis_main"), doc, stubs);
    CHECK(axis->id == "sequence#0");  // unlabeled root gets a generated id
    for (const char* id : {"amove", "amove.post", "amove.pre", "amove.inv",
                           "amove.act", "areset.act", "apower.act"})
        CHECK(find_node(*axis, id) != nullptr);

    // the HMI lookup statically adopted its single achiever
    TreeNodePtr hmi = instantiate_tree(*doc.find_tree("hmi_main"), doc, stubs);
    const TreeNode* ask = find_node(*hmi, "ask");
    REQUIRE(ask != nullptr);
    CHECK(ask->kind == NodeKind::Lookup);
    REQUIRE(ask->children.size() == 1);
    CHECK(find_node(*hmi, "ask.bind.a0.get_axis_position.act") != nullptr);

    // stub actions run forever and leave the world untouched
    WorldState w = instantiate_world(*doc.find_world("axis_world"));
    CHECK(stubs.find("move_absolute").step(w, {}) == Status::Running);
    CHECK(w.get("pos").as_real() == 0.0);
}

TEST_CASE("label-free composite trees are their own instantiation inverse") {
    const std::string text =
        "action a()\n"
        "\n"
        "tree t {\n"
        "  sequence {\n"
        "    cond \"x == 1\"\n"
        "    fallback {\n"
        "      action a()\n"
        "      remote h.t\n"
        "    }\n"
        "  }\n"
        "}\n";
    Document doc = parse_document(text);
    ActionRegistry stubs = stub_actions(doc);
    TreeNodePtr tree = instantiate_tree(doc.trees[0], doc, stubs);
    CHECK(ast_from_tree(*tree) == doc.trees[0].root);
}

TEST_CASE("deployment instantiation wires hosts, ports and dotted nodes") {
    Document doc = parse_document(demo_text());
    ActionRegistry stubs = stub_actions(doc);
    Deployment dep = instantiate_deployment(*doc.find_deployment("cell"), doc, stubs);
    REQUIRE(dep.hosts.size() == 4);
    CHECK(dep.data_links.size() == 5);
    const HostSpec* axis = dep.find_host("axis");
    REQUIRE(axis != nullptr);
    CHECK(axis->tree_name == "axis_main");
    CHECK(axis->world.get("speed").unit() == "mm");
    REQUIRE(axis->ports.size() == 2);
    CHECK(axis->ports[0].node == "amove.act");  // dotted ref into the expansion
    CHECK(find_node(*axis->tree, "amove.act") != nullptr);
    CHECK(validate_topology(dep).ok);
}

TEST_CASE("dangling references collect into one resolution error") {
    const std::string text =
        "tree t {\n"
        "  sequence {\n"
        "    skill nope()\n"
        "    action gone()\n"
        "  }\n"
        "}\n";
    try {
        parse_document(text);
        FAIL("expected ResolutionError");
    } catch (const ResolutionError& e) {
        REQUIRE(e.issues.size() == 2);
        CHECK(e.issues[0].find("unknown skill 'nope'") != std::string::npos);
        CHECK(e.issues[0].rfind("3:5: ", 0) == 0);  // position of the reference
        CHECK(e.issues[1].find("unknown action 'gone'") != std::string::npos);
        CHECK(std::string(e.what()).find("unresolved references:") == 0);
    }
}

TEST_CASE("resolution rejects duplicates and broken deployment wiring") {
    auto issues_of = [](const std::string& text) {
        try {
            parse_document(text);
        } catch (const ResolutionError& e) {
            return e.issues;
        }
        return std::vector<std::string>{};
    };

    auto issues = issues_of("world w { var x: int = 0 }\nworld w { var y: int = 1 }\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("duplicate world 'w'") != std::string::npos);

    issues = issues_of(
        "action a()\n"
        "skill s { post: \"x == 1\" action: missing }\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("references unknown action 'missing'") != std::string::npos);

    issues = issues_of(
        "tree t { sequence { cond \"x == 1\" as c cond \"x == 2\" as c } }\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("duplicate label 'c'") != std::string::npos);

    const std::string dep_prefix =
        "world w { var x: int = 0 }\n"
        "tree t { cond \"x == 1\" as c }\n";
    issues = issues_of(dep_prefix +
                       "deployment d {\n"
                       "  host h { tree: t world: w }\n"
                       "  host h { tree: t world: w }\n"
                       "}\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("duplicate host 'h'") != std::string::npos);

    issues = issues_of(dep_prefix +
                       "deployment d {\n"
                       "  host h { tree: t world: w }\n"
                       "  link h.p -> h.q\n"
                       "}\n");
    REQUIRE(issues.size() == 2);  // both endpoints unknown
    CHECK(issues[0].find("link references unknown port 'h.p'") != std::string::npos);

    issues = issues_of(dep_prefix +
                       "tree r { remote h2.t }\n"
                       "deployment d {\n"
                       "  host h { tree: r world: w }\n"
                       "}\n");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("remote 'h2.t' matches no host") != std::string::npos);

    issues = issues_of(dep_prefix +
                       "deployment d {\n"
                       "  host h { tree: t2 world: w2 }\n"
                       "}\n");
    REQUIRE(issues.size() == 2);
    CHECK(issues[0].find("unknown tree 't2'") != std::string::npos);
    CHECK(issues[1].find("unknown world 'w2'") != std::string::npos);
}

TEST_CASE("malformed documents fail with positioned syntax errors") {
    auto expect_syntax = [](const std::string& text, const std::string& expected_part,
                            int line = 0, int col = 0) {
        try {
            parse_document(text);
            FAIL_CHECK("no error for: " << text);
        } catch (const SyntaxError& e) {
            CHECK(e.expected.find(expected_part) != std::string::npos);
            if (line) CHECK(e.line == line);
            if (col) CHECK(e.col == col);
        }
    };

    expect_syntax("skill s { action: a }\n", "a 'post' field", 1, 21);
    expect_syntax("skill s { post: \"x == 1\" }\n", "an 'action' field", 1, 26);
    expect_syntax("skill s { pre: \"x == 1\" pre: \"y == 2\" post: \"z == 3\" action: a }\n",
                  "no duplicate 'pre' field");
    expect_syntax("world w { var x: float = 0 }\n", "a type (", 1, 18);
    expect_syntax("world w { var x: bool = 3 }\n", "a literal of type bool", 1, 25);
    expect_syntax("world w { var x: int = 0.5 }\n", "a literal of type int");
    expect_syntax("skill s { priority: 1.5 post: \"x == 1\" action: a }\n",
                  "an integer priority");
    expect_syntax("tree t { cond \"x == 1\n}\n", "a closing '\"' on the same line", 1, 15);
    expect_syntax("tree t { action a(p = 1, p = 2) }\n", "a distinct binding name", 1, 26);
    expect_syntax("goal g { }\n", "at least one condition string");
    expect_syntax("tree t { spin \"x\" }\n", "a node (");
    expect_syntax("banana\n", "'world', 'action', 'skill', 'tree', 'goal' or 'deployment'",
                  1, 1);
    expect_syntax("deployment d { host h { world: w tree: t } }\n", "'tree'");
    expect_syntax("action a(p: real inout)\n", "'in' or 'out'");

    // condition errors surface at the file position of the offending character
    expect_syntax("tree t {\n  cond \"pow%er == true\"\n}\n", "", 2, 12);
    expect_syntax("goal g {\n  \"== true\"\n}\n", "", 2, 4);
}

TEST_CASE("corrupting any single character is caught on its line") {
    const std::string text = demo_text();
    REQUIRE(text.size() > 100);

    // string-literal interiors (and their quotes) may report at the start of
    // the token; everything else must be pinpointed exactly
    std::vector<bool> in_string(text.size(), false);
    {
        bool open = false;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '\n') {
                open = false;  // strings never span lines
            } else if (text[i] == '"') {
                in_string[i] = true;  // both quotes count as "inside"
                open = !open;
            } else if (open) {
                in_string[i] = true;
            }
        }
    }

    int checked = 0, exact = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '%') continue;
        std::string bad = text;
        bad[i] = '%';
        auto [line, col] = line_col(text, i);
        try {
            parse_document(bad);
            FAIL_CHECK("corruption at offset " << i << " went unnoticed");
        } catch (const SyntaxError& e) {
            ++checked;
            CHECK(e.line == line);
            if (!in_string[i]) {
                // outside strings the lexer rejects '%' at its own position
                // ('->' is the one two-character token: its tail reports at
                // the head)
                const bool arrow_tail = text[i] == '>' && i > 0 && text[i - 1] == '-';
                CHECK(e.col == (arrow_tail ? col - 1 : col));
            }
            if (e.col == col) ++exact;
        } catch (const Error& e) {
            FAIL_CHECK("offset " << i << ": expected SyntaxError, got " << e.what());
        }
    }
    CHECK(checked == static_cast<int>(text.size()));  // the demo contains no '%'
    CHECK(exact > checked * 8 / 10);  // the vast majority pinpoint the character
}

TEST_CASE("planner output re-executes identically after an emit and reparse") {
    Document doc = parse_document(demo_text());
    SkillRegistry skills = skills_from(doc);

    auto make_actions = [] {
        ActionRegistry reg;
        register_plant_actions(reg, OperatorPrompt::scripted({42.0}));
        return reg;
    };
    ActionRegistry plan_reg = make_actions();
    PlanTree plan = backchain(goal_from(*doc.find_goal("demo_goal")), skills, plan_reg);
    REQUIRE(plan.unrefined.empty());

    // emit the plan as a document next to the declarations it depends on
    Document out;
    out.actions = doc.actions;
    out.skills = doc.skills;
    out.trees.push_back(TreeDecl{"planned", ast_from_tree(*plan.root), {}});
    const std::string emitted = print_document(out);
    Document back = parse_document(emitted);
    CHECK(back == out);

    auto run_once = [&](const TreeDecl& t, const Document& d) {
        ActionRegistry reg = make_actions();
        TreeNodePtr tree = instantiate_tree(t, d, reg);
        WorldState w;
        w.declare("pos", Value::real(0.0, "mm"));
        w.declare("target", Value::real(0.0, "mm"));
        w.declare("target_valid", Value::boolean(false));
        w.declare("at_target", Value::boolean(false));
        w.declare("power", Value::boolean(true));
        w.declare("error", Value::boolean(false));
        w.declare("speed", Value::real(10.0, "mm"));
        Executor ex(*tree, w, reg);
        AxisPlant plant;
        ex.post_tick = plant.hook();
        auto res = ex.run(100);
        REQUIRE(res.status == Status::Success);
        CHECK(w.get("pos").as_real() == 42.0);
        return ex.trace().to_text();
    };

    const std::string direct = run_once(out.trees[0], out);
    const std::string reparsed = run_once(*back.find_tree("planned"), back);
    CHECK(direct == reparsed);
    CHECK(!direct.empty());
}
