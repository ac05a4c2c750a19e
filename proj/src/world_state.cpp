#include "btweave/world_state.hpp"

#include "btweave/errors.hpp"

namespace btweave {

WorldState::WorldState(double dt) { set_dt(dt); }

void WorldState::set_dt(double dt) {
    if (!(dt > 0.0)) throw Error("dt must be positive");
    dt_ = dt;
}

void WorldState::set_clock(double t) {
    if (t < 0.0) throw Error("clock must be non-negative");
    clock_ = t;
}

void WorldState::declare(const std::string& name, Value initial) {
    vars_.insert_or_assign(name, std::move(initial));
}

bool WorldState::has(const std::string& name) const { return vars_.count(name) > 0; }

const Value& WorldState::get(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw UnknownVariableError(name);
    return it->second;
}

void WorldState::set(const std::string& name, Value v) {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw UnknownVariableError(name);
    if (it->second.type() != v.type())
        throw TypeMismatchError(name, btweave::to_string(it->second.type()),
                                btweave::to_string(v.type()));
    if (it->second.type() == ValueType::Real && it->second.unit() != v.unit()) {
        // Preserve the declared unit when the writer supplies a bare real.
        if (v.unit().empty()) {
            v = Value::real(v.as_real(), it->second.unit());
        } else {
            throw TypeMismatchError(name, "real [" + it->second.unit() + "]",
                                    "real [" + v.unit() + "]");
        }
    }
    it->second = std::move(v);
}

std::string WorldState::to_string() const {
    std::string out;
    for (const auto& [name, value] : vars_) {
        if (!out.empty()) out += "\n";
        out += name + " = " + value.to_string();
        if (value.type() == ValueType::Real && !value.unit().empty())
            out += " [" + value.unit() + "]";
    }
    return out;
}

}  // namespace btweave
