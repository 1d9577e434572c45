#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace archsim {

/// Durations and instants are integer microseconds of virtual time.
using Micros = std::uint64_t;

struct SimTime {
    Micros micros = 0;

    friend constexpr auto operator<=>(SimTime, SimTime) = default;
    constexpr SimTime operator+(Micros d) const { return SimTime{micros + d}; }
    constexpr Micros operator-(SimTime other) const { return micros - other.micros; }
};

inline constexpr SimTime kTimeZero{0};

/// A component slot. The generation is bumped every time the slot is restarted,
/// so (ordinal, generation) is never reused within a run.
struct ComponentId {
    std::uint32_t ordinal = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t generation = 0;

    friend constexpr auto operator<=>(ComponentId, ComponentId) = default;
    constexpr bool valid() const { return ordinal != std::numeric_limits<std::uint32_t>::max(); }
    constexpr bool same_slot(ComponentId other) const { return ordinal == other.ordinal; }
};

inline constexpr ComponentId kNoComponent{};

enum class Role : std::uint8_t { Client, Layer, Filter, Sink, Directory, Service, Leader, Worker, Peer };

const char* to_string(Role role);

// Error hierarchy. Every error raised by the library derives from archsim::Error.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchedulingInPast : public Error {
public:
    SchedulingInPast(SimTime requested, SimTime now);
};

class UnknownStream : public Error {
public:
    explicit UnknownStream(std::uint32_t stream);
};

class UnknownComponent : public Error {
public:
    explicit UnknownComponent(const std::string& name)
        : Error("unknown component: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class RestartOfLiveComponent : public Error {
public:
    explicit RestartOfLiveComponent(const std::string& name)
        : Error("restart of live component: " + name) {}
};

class MalformedTrace : public Error {
public:
    MalformedTrace(std::size_t line, const std::string& what)
        : Error("malformed trace at line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyWindow : public Error {
public:
    using Error::Error;
};

}  // namespace archsim

template <>
struct std::hash<archsim::ComponentId> {
    std::size_t operator()(archsim::ComponentId id) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t{id.ordinal} << 32) | id.generation);
    }
};
