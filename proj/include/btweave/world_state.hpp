#pragma once

#include <map>
#include <string>

#include "btweave/value.hpp"

namespace btweave {

// Typed variable store (blackboard) shared by conditions and actions, plus
// the logical clock. Writes must match the declared type of the variable.
class WorldState {
  public:
    WorldState() = default;
    explicit WorldState(double dt);

    void declare(const std::string& name, Value initial);
    bool has(const std::string& name) const;
    const Value& get(const std::string& name) const;

    // Type-checked write; the variable must already be declared.
    void set(const std::string& name, Value v);

    double clock() const { return clock_; }
    double dt() const { return dt_; }
    void set_dt(double dt);
    void set_clock(double t);

    // One tick elapsed: clock += dt.
    void advance_clock() { clock_ += dt_; }

    const std::map<std::string, Value>& variables() const { return vars_; }

    std::string to_string() const;

    bool operator==(const WorldState& rhs) const {
        return vars_ == rhs.vars_ && clock_ == rhs.clock_ && dt_ == rhs.dt_;
    }

  private:
    std::map<std::string, Value> vars_;
    double clock_ = 0.0;
    double dt_ = 1.0;
};

}  // namespace btweave
