#pragma once

#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace archsim {

/// Conductor command, as carried by the control API and by scheduled
/// scenario commands. JSON form: {"type": "...", "id": N, ...}.
struct Command {
    enum class Type : std::uint8_t {
        Pause,
        Resume,
        Step,
        SetPace,
        Inject,
        Crash,
        Restart,
        SpawnWorker,
        StopWorker,
        SetRate,
        ToggleSilentDrop,
    };

    Type type = Type::Pause;
    std::uint64_t id = 0;
    std::string target;   // entry client / component / leader / client / peer
    std::string service;  // Inject
    std::uint32_t count = 1;
    std::uint64_t steps = 1;  // Step
    double value = 0.0;       // SetPace factor, SetRate rps

    /// Commands that only steer the session (no engine state change).
    bool session_only() const;

    nlohmann::json to_json() const;
    /// Throws archsim::Error with a readable message on bad input.
    static Command from_json(const nlohmann::json& j);

    friend bool operator==(const Command&, const Command&) = default;
};

const char* to_string(Command::Type type);

/// JSON has one integer type; accepts either encoding of a value >= 0.
inline bool is_non_negative_integer(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace archsim
