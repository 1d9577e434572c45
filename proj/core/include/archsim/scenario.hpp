#pragma once

#include "archsim/behaviors.hpp"
#include "archsim/command.hpp"
#include "archsim/distribution.hpp"
#include "archsim/topology.hpp"
#include "archsim/types.hpp"
#include "archsim/workload.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace archsim {

struct Pacing {
    enum class Mode : std::uint8_t { Batch, RealTime };
    Mode mode = Mode::Batch;
    double factor = 1.0;
    friend bool operator==(const Pacing&, const Pacing&) = default;
};

/// One system of the scenario's style. Only the fields of that style are used.
struct SystemDecl {
    struct Directory {
        std::string spec;
        std::vector<std::string> catalogue;
        friend bool operator==(const Directory&, const Directory&) = default;
    };
    struct Service {
        std::string spec;
        std::uint32_t instances = 1;
        friend bool operator==(const Service&, const Service&) = default;
    };

    std::string name;
    // layered
    std::vector<std::string> layers;
    // pipeline
    std::vector<std::string> stages;
    std::map<std::size_t, std::uint32_t> replication;
    // client_server
    std::vector<Directory> directories;
    std::map<std::string, Service> services;
    // leader_follower
    std::string leader;
    std::string worker;
    std::uint32_t initial_workers = 1;
    // p2p
    std::string peer;
    std::uint32_t peers = 0;
    std::uint32_t target_degree = 0;
    std::map<std::uint32_t, std::set<std::string>> capabilities;

    friend bool operator==(const SystemDecl&, const SystemDecl&) = default;
};

struct ClientGroup {
    std::string name;
    std::string system;
    std::uint32_t count = 1;
    ClientConfig cfg;
    std::vector<std::uint32_t> entry;
    friend bool operator==(const ClientGroup&, const ClientGroup&) = default;
};

struct ScheduledCommand {
    SimTime at;
    Command cmd;
    friend bool operator==(const ScheduledCommand&, const ScheduledCommand&) = default;
};

/// Everything that determines a run. Durations are integer microseconds.
struct Scenario {
    std::string version = "1";
    std::uint64_t seed = 0;
    Micros duration = 0;
    Micros warmup = 0;
    Style style = Style::Layered;
    std::map<std::string, ComponentSpec> spec_library;
    std::vector<SystemDecl> systems;
    std::vector<ClientGroup> workload;
    std::vector<FaultEvent> faults;
    std::vector<ScheduledCommand> commands;
    Distribution link_latency = Distribution::constant(0);
    Pacing pacing;
    Micros snapshot_period = 1'000'000;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class UnknownSpecReference : public Error {
public:
    explicit UnknownSpecReference(std::string name)
        : Error("unknown spec reference: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class StyleParameterMismatch : public Error {
public:
    using Error::Error;
};

/// Parses and fully validates a scenario, filling every default.
Scenario parse_scenario(std::string_view text);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
/// Canonical JSON: sorted keys, no insignificant whitespace, defaults explicit.
std::string emit_effective(const Scenario& s);

Scenario load_scenario_file(const std::string& path);

/// Topology of every system, clients included.
std::vector<Topology> build_topologies(const Scenario& s);

struct ReuseEntry {
    std::string spec;
    Role role = Role::Layer;
    std::uint32_t systems = 0;    // distinct systems referencing it
    std::uint32_t instances = 0;  // components built from it
};
std::vector<ReuseEntry> reuse_report(const Scenario& s);

}  // namespace archsim
