#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "btweave/dsl.hpp"
#include "btweave/runtime.hpp"

namespace btweave {

// Position-reach tolerance of the simulated axes, in mm.
inline constexpr double kReachEps = 1e-6;

// Simulated per-host dynamics, driven from the executor's post-tick hook.
// Maintains the derived at_target flag and applies scheduled disturbances
// (fault injection / variable writes) indexed by the host's own tick count
// (1-based: an entry for tick k fires after the host's k-th tick).
class AxisPlant {
  public:
    // A fault trips the drive: error := true and power := false.
    void inject_error(int tick);
    void clear_error(int tick);
    void schedule_write(int tick, std::string var, Value v);

    // Post-tick closure bound to this plant; the plant must outlive it.
    std::function<void(WorldState&)> hook();

    int ticks() const { return ticks_; }

  private:
    struct ErrorEdge {
        int tick;
        bool set;
    };
    struct Write {
        int tick;
        std::string var;
        Value value;
    };
    std::vector<ErrorEdge> errors_;
    std::vector<Write> writes_;
    int ticks_ = 0;

    void step(WorldState& w);
};

// Operator input channel: scripted answers for tests and pipelines, or an
// interactive terminal prompt. Scripted answers are consumed in order; an
// empty slot means "no answer arrived this tick".
class OperatorPrompt {
  public:
    static std::shared_ptr<OperatorPrompt> scripted(
        std::vector<std::optional<double>> answers);
    static std::shared_ptr<OperatorPrompt> interactive(
        std::string prompt = "target position [mm]? ");

    // Next answer if one is available. Interactive mode blocks on stdin;
    // EOF and blank lines yield no answer.
    std::optional<double> ask();

    int asked() const { return asked_; }

  private:
    bool interactive_ = false;
    std::string prompt_;
    std::deque<std::optional<double>> answers_;
    int asked_ = 0;
};

// Scripted answers, one per line; a blank line is "no answer this tick".
// Throws Error on a malformed number.
std::vector<std::optional<double>> parse_answers(const std::string& text);

// Registers the plant action set: move_absolute, reset_errors, power_on
// (against the axis world schema: pos, target, target_valid, at_target,
// power, error, speed) and ask_operator bound to the given channel.
void register_plant_actions(ActionRegistry& reg, std::shared_ptr<OperatorPrompt> op);

// The four-device demo document; demos/demo_axis.btw ships this exact text.
const std::string& demo_document_text();

struct DemoOptions {
    // scripted operator input; ignored when op is provided
    std::vector<std::optional<double>> answers = {100.0};
    std::shared_ptr<OperatorPrompt> op;  // overrides answers (e.g. interactive)

    // start with the target already distributed; the HMI is never consulted
    bool preset_target = false;
    double preset_value = 100.0;

    // drive faults, by host-local tick
    std::vector<int> axis_errors;
    std::vector<int> robot_errors;
};

// demo_skillset() output: the instantiated four-host cell plus the shared
// registries and plant/operator handles the deployment's hooks point into.
// Keep this object alive for as long as the deployment runs.
struct DemoSetup {
    Document doc;
    SkillRegistry skills;
    std::shared_ptr<ActionRegistry> actions;
    std::shared_ptr<OperatorPrompt> op;
    std::shared_ptr<AxisPlant> base_plant, hmi_plant, axis_plant, robot_plant;
    Deployment deployment;

    AxisPlant& plant_of(const std::string& host);
};

DemoSetup demo_skillset(DemoOptions opts = {});

}  // namespace btweave
