#include "btweave/plant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "btweave/errors.hpp"

namespace btweave {

// ---------------------------------------------------------------------------
// AxisPlant
// ---------------------------------------------------------------------------

void AxisPlant::inject_error(int tick) { errors_.push_back({tick, true}); }
void AxisPlant::clear_error(int tick) { errors_.push_back({tick, false}); }

void AxisPlant::schedule_write(int tick, std::string var, Value v) {
    writes_.push_back({tick, std::move(var), std::move(v)});
}

std::function<void(WorldState&)> AxisPlant::hook() {
    return [this](WorldState& w) { step(w); };
}

void AxisPlant::step(WorldState& w) {
    ++ticks_;
    for (const ErrorEdge& e : errors_)
        if (e.tick == ticks_) {
            w.set("error", Value::boolean(e.set));
            if (e.set) w.set("power", Value::boolean(false));  // fault trips the drive
        }
    for (const Write& wr : writes_)
        if (wr.tick == ticks_) w.set(wr.var, wr.value);
    if (w.has("at_target")) {
        const bool valid = w.get("target_valid").as_bool();
        const bool reached =
            std::abs(w.get("pos").as_real() - w.get("target").as_real()) <= kReachEps;
        w.set("at_target", Value::boolean(valid && reached));
    }
}

// ---------------------------------------------------------------------------
// OperatorPrompt
// ---------------------------------------------------------------------------

std::shared_ptr<OperatorPrompt> OperatorPrompt::scripted(
    std::vector<std::optional<double>> answers) {
    auto op = std::make_shared<OperatorPrompt>();
    op->answers_.assign(answers.begin(), answers.end());
    return op;
}

std::shared_ptr<OperatorPrompt> OperatorPrompt::interactive(std::string prompt) {
    auto op = std::make_shared<OperatorPrompt>();
    op->interactive_ = true;
    op->prompt_ = std::move(prompt);
    return op;
}

namespace {

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::optional<double> parse_number(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::optional<double> OperatorPrompt::ask() {
    ++asked_;
    if (!interactive_) {
        if (answers_.empty()) return std::nullopt;
        std::optional<double> a = answers_.front();
        answers_.pop_front();
        return a;
    }
    std::cerr << prompt_ << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return std::nullopt;  // EOF: keep running
    line = trimmed(line);
    if (line.empty()) return std::nullopt;
    std::optional<double> v = parse_number(line);
    if (!v) std::cerr << "not a number: " << line << "\n";
    return v;
}

std::vector<std::optional<double>> parse_answers(const std::string& text) {
    std::vector<std::optional<double>> out;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        line = trimmed(line);
        if (line.empty()) {
            out.push_back(std::nullopt);
            continue;
        }
        std::optional<double> v = parse_number(line);
        if (!v) throw Error("bad operator answer at line " + std::to_string(n) + ": " + line);
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plant actions
// ---------------------------------------------------------------------------

void register_plant_actions(ActionRegistry& reg, std::shared_ptr<OperatorPrompt> op) {
    reg.add(ActionImpl{
        "move_absolute",
        [](WorldState& w, const Params& p) {
            if (!w.get("power").as_bool() || w.get("error").as_bool())
                return Status::Failure;
            double target = 0.0;
            auto it = p.find("target");
            if (it != p.end()) target = it->second.as_real();
            else if (w.get("target_valid").as_bool()) target = w.get("target").as_real();
            else return Status::Failure;  // no target set
            const double pos = w.get("pos").as_real();
            const double delta = target - pos;
            if (std::abs(delta) <= kReachEps) return Status::Success;
            const double speed = w.get("speed").as_real();
            const double np = pos + std::clamp(delta, -speed, speed);
            w.set("pos", Value::real(np, w.get("pos").unit()));
            return std::abs(target - np) <= kReachEps ? Status::Success : Status::Running;
        },
        nullptr,
    });
    reg.add(ActionImpl{
        "reset_errors",
        [](WorldState& w, const Params&) {
            if (!w.get("error").as_bool()) return Status::Success;
            w.set("error", Value::boolean(false));
            return Status::Running;  // fault acknowledge settles next tick
        },
        nullptr,
    });
    reg.add(ActionImpl{
        "power_on",
        [](WorldState& w, const Params&) {
            if (w.get("error").as_bool()) return Status::Failure;  // refuses while faulted
            if (w.get("power").as_bool()) return Status::Success;
            w.set("power", Value::boolean(true));
            return Status::Running;
        },
        nullptr,
    });
    reg.add(ActionImpl{
        "ask_operator",
        [op](WorldState& w, const Params&) {
            if (w.get("target_valid").as_bool()) return Status::Success;
            std::optional<double> a = op->ask();
            if (!a) return Status::Running;  // no answer yet
            w.set("target", Value::real(*a, w.get("target").unit()));
            w.set("target_valid", Value::boolean(true));
            return Status::Success;
        },
        nullptr,
    });
}

// ---------------------------------------------------------------------------
// Demo document + deployment
// ---------------------------------------------------------------------------

const std::string& demo_document_text() {
    static const std::string text = R"(world base_world {
  var estop: bool = false
  var target_ready: bool = false
}

world hmi_world {
  var target: real [mm] = 0.0
  var target_valid: bool = false
}

world axis_world {
  var pos: real [mm] = 0.0
  var target: real [mm] = 0.0
  var target_valid: bool = false
  var at_target: bool = false
  var power: bool = false
  var error: bool = false
  var speed: real [mm] = 10.0
}

world robot_world {
  var pos: real [mm] = 0.0
  var target: real [mm] = 0.0
  var target_valid: bool = false
  var at_target: bool = false
  var power: bool = false
  var error: bool = false
  var speed: real [mm] = 10.0
}

world axis_fts_world {
  var pos: real [mm] = 0.0
  var target: real [mm] = 10.0
  var target_valid: bool = true
  var at_target: bool = false
  var power: bool = false
  var error: bool = false
  var speed: real [mm] = 10.0
}

action move_absolute(target: real in)

action reset_errors()

action power_on()

action ask_operator(target: real out)

skill get_axis_position {
  post: "target_valid == true"
  action: ask_operator
  param target: real out -> target
}

skill reset_axis {
  pre: "error == true"
  post: "error == false"
  action: reset_errors
}

skill power_on_axis {
  pre: "error == false"
  post: "power == true"
  action: power_on
}

skill move_axis_to_pos {
  pre: "target_valid == true"
  inv: "power == true AND error == false"
  post: "at_target == true"
  action: move_absolute
}

tree hmi_main {
  sequence {
    lookup post = "target_valid == true" as ask
    cond "target_valid == true" as ready
  }
}

tree axis_main {
  sequence {
    skill reset_axis() as areset
    skill power_on_axis() as apower
    skill move_axis_to_pos() as amove
  }
}

tree robot_main {
  sequence {
    skill reset_axis() as rreset
    skill power_on_axis() as rpower
    skill move_axis_to_pos() as rmove
  }
}

tree axis_blocked {
  sequence {
    skill power_on_axis() as bpower
    skill move_axis_to_pos() as bmove
  }
}

tree base_main {
  sequence {
    cond "estop == false" as safety
    fallback {
      cond "target_ready == true" as guard
      remote hmi.hmi_main as ask_hmi
    } as get_target
    remote axis.axis_main as do_axis
    remote robot.robot_main as do_robot
  }
}

goal demo_goal {
  "at_target == true"
}

deployment cell {
  host base {
    tree: base_main
    world: base_world
    port in ready_in: bool node guard var target_ready
  }
  host hmi {
    tree: hmi_main
    world: hmi_world
    port out target_out: real [mm] node ready var target
    port out valid_out: bool node ready var target_valid
  }
  host axis {
    tree: axis_main
    world: axis_world
    port in target_in: real [mm] node amove.act var target
    port in valid_in: bool node amove.pre var target_valid
  }
  host robot {
    tree: robot_main
    world: robot_world
    port in target_in: real [mm] node rmove.act var target
    port in valid_in: bool node rmove.pre var target_valid
  }
  link hmi.target_out -> axis.target_in
  link hmi.target_out -> robot.target_in
  link hmi.valid_out -> axis.valid_in
  link hmi.valid_out -> robot.valid_in
  link hmi.valid_out -> base.ready_in
}
)";
    return text;
}

AxisPlant& DemoSetup::plant_of(const std::string& host) {
    if (host == "base") return *base_plant;
    if (host == "hmi") return *hmi_plant;
    if (host == "axis") return *axis_plant;
    if (host == "robot") return *robot_plant;
    throw Error("no plant for host '" + host + "'");
}

DemoSetup demo_skillset(DemoOptions opts) {
    DemoSetup s;
    s.doc = parse_document(demo_document_text());
    s.skills = skills_from(s.doc);
    s.op = opts.op ? opts.op : OperatorPrompt::scripted(opts.answers);
    s.actions = std::make_shared<ActionRegistry>();
    register_plant_actions(*s.actions, s.op);
    for (const ActionDecl& a : s.doc.actions)  // declared-but-unbound: inert stubs
        if (!s.actions->has(a.name))
            s.actions->add(ActionImpl{
                a.name, [](WorldState&, const Params&) { return Status::Running; }, nullptr});
    s.deployment = instantiate_deployment(*s.doc.find_deployment("cell"), s.doc, *s.actions);

    s.base_plant = std::make_shared<AxisPlant>();
    s.hmi_plant = std::make_shared<AxisPlant>();
    s.axis_plant = std::make_shared<AxisPlant>();
    s.robot_plant = std::make_shared<AxisPlant>();
    for (int t : opts.axis_errors) s.axis_plant->inject_error(t);
    for (int t : opts.robot_errors) s.robot_plant->inject_error(t);
    s.deployment.find_host("base")->post_tick = s.base_plant->hook();
    s.deployment.find_host("hmi")->post_tick = s.hmi_plant->hook();
    s.deployment.find_host("axis")->post_tick = s.axis_plant->hook();
    s.deployment.find_host("robot")->post_tick = s.robot_plant->hook();

    if (opts.preset_target) {
        const Value yes = Value::boolean(true);
        s.deployment.find_host("base")->world.set("target_ready", yes);
        for (const char* h : {"hmi", "axis", "robot"}) {
            WorldState& w = s.deployment.find_host(h)->world;
            w.set("target", Value::real(opts.preset_value, "mm"));
            w.set("target_valid", yes);
        }
    }
    return s;
}

}  // namespace btweave
