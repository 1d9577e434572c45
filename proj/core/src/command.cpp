#include "archsim/command.hpp"

#include <array>
#include <utility>

namespace archsim {
namespace {

constexpr std::array<std::pair<Command::Type, const char*>, 11> kNames{{
    {Command::Type::Pause, "pause"},
    {Command::Type::Resume, "resume"},
    {Command::Type::Step, "step"},
    {Command::Type::SetPace, "set_pace"},
    {Command::Type::Inject, "inject"},
    {Command::Type::Crash, "crash"},
    {Command::Type::Restart, "restart"},
    {Command::Type::SpawnWorker, "spawn_worker"},
    {Command::Type::StopWorker, "stop_worker"},
    {Command::Type::SetRate, "set_rate"},
    {Command::Type::ToggleSilentDrop, "toggle_silent_drop"},
}};

// Field that names the command's target, per type.
const char* target_key(Command::Type type) {
    switch (type) {
        case Command::Type::Inject: return "entry";
        case Command::Type::Crash:
        case Command::Type::Restart:
        case Command::Type::StopWorker: return "component";
        case Command::Type::SpawnWorker: return "leader";
        case Command::Type::SetRate: return "client";
        case Command::Type::ToggleSilentDrop: return "peer";
        default: return nullptr;
    }
}

}  // namespace

const char* to_string(Command::Type type) {
    for (const auto& [t, name] : kNames)
        if (t == type) return name;
    return "?";
}

bool Command::session_only() const {
    return type == Type::Pause || type == Type::Resume || type == Type::Step || type == Type::SetPace;
}

nlohmann::json Command::to_json() const {
    nlohmann::json j{{"type", to_string(type)}, {"id", id}};
    if (const char* key = target_key(type)) j[key] = target;
    switch (type) {
        case Type::Inject:
            j["service"] = service;
            j["count"] = count;
            break;
        case Type::Step: j["n"] = steps; break;
        case Type::SetPace: j["factor"] = value; break;
        case Type::SetRate: j["rps"] = value; break;
        default: break;
    }
    return j;
}

Command Command::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("command must be an object");
    const auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) throw Error("command without 'type'");
    Command c;
    bool known = false;
    for (const auto& [t, name] : kNames) {
        if (*type_it == name) {
            c.type = t;
            known = true;
        }
    }
    if (!known) throw Error("unknown command type '" + type_it->get<std::string>() + "'");
    if (const auto it = j.find("id"); it != j.end()) {
        if (!is_non_negative_integer(*it)) throw Error("command 'id' must be a non-negative integer");
        c.id = it->get<std::uint64_t>();
    }
    auto need = [&](const char* key) -> const nlohmann::json& {
        const auto it = j.find(key);
        if (it == j.end()) throw Error(std::string(to_string(c.type)) + " needs '" + key + "'");
        return *it;
    };
    if (const char* key = target_key(c.type)) {
        // spawn_worker may omit the leader when the scenario has exactly one.
        if (c.type == Type::SpawnWorker && !j.contains(key)) {
            c.target.clear();
        } else {
            const auto& v = need(key);
            if (!v.is_string()) throw Error(std::string("'") + key + "' must be a string");
            c.target = v.get<std::string>();
        }
    }
    switch (c.type) {
        case Type::Inject: {
            const auto& s = need("service");
            if (!s.is_string()) throw Error("'service' must be a string");
            c.service = s.get<std::string>();
            if (const auto it = j.find("count"); it != j.end()) {
                if (!is_non_negative_integer(*it) || it->get<std::uint64_t>() == 0)
                    throw Error("'count' must be a positive integer");
                c.count = it->get<std::uint32_t>();
            }
            break;
        }
        case Type::Step: {
            if (const auto it = j.find("n"); it != j.end()) {
                if (!is_non_negative_integer(*it)) throw Error("'n' must be a non-negative integer");
                c.steps = it->get<std::uint64_t>();
            }
            break;
        }
        case Type::SetPace: {
            const auto& v = need("factor");
            if (!v.is_number() || v.get<double>() <= 0.0) throw Error("'factor' must be > 0");
            c.value = v.get<double>();
            break;
        }
        case Type::SetRate: {
            const auto& v = need("rps");
            if (!v.is_number() || v.get<double>() < 0.0) throw Error("'rps' must be >= 0");
            c.value = v.get<double>();
            break;
        }
        default: break;
    }
    return c;
}

}  // namespace archsim
