#pragma once

#include "archsim/behaviors.hpp"
#include "archsim/distribution.hpp"
#include "archsim/rng.hpp"
#include "archsim/types.hpp"

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace archsim {

enum class Style : std::uint8_t { Layered, Pipeline, ClientServer, LeaderFollower, PeerToPeer };

const char* to_string(Style style);
std::optional<Style> style_from_string(std::string_view text);

// Role cards as data. These are what a scenario's spec_library holds.

struct LayerSpec {
    Distribution proc_in;
    Distribution proc_out;
    Micros downstream_timeout = 0;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};
struct FilterSpec {
    Distribution proc;
    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};
struct DirectorySpec {
    Distribution route_delay;
    friend bool operator==(const DirectorySpec&, const DirectorySpec&) = default;
};
struct ServiceSpec {
    Distribution proc;
    friend bool operator==(const ServiceSpec&, const ServiceSpec&) = default;
};
struct LeaderSpec {
    LeaderConfig cfg;
    friend bool operator==(const LeaderSpec&, const LeaderSpec&) = default;
};
struct WorkerSpec {
    Distribution proc;
    friend bool operator==(const WorkerSpec&, const WorkerSpec&) = default;
};
struct PeerSpec {
    Distribution proc;
    std::uint32_t forward_fanout = 1;
    Micros maintenance_period = 0;
    double churn = 0.0;
    friend bool operator==(const PeerSpec&, const PeerSpec&) = default;
};

using ComponentSpec = std::variant<LayerSpec, FilterSpec, DirectorySpec, ServiceSpec, LeaderSpec, WorkerSpec, PeerSpec>;

Role spec_role(const ComponentSpec& spec);

struct NamedSpec {
    std::string name;  // spec_library key
    ComponentSpec spec;
};

struct ClientDecl {
    std::string name;
    ClientConfig cfg;
    std::vector<std::uint32_t> entry;  // explicit directory / peer indices; empty: builder default
};

struct Node {
    ComponentId id;  // local ordinal within the topology
    std::string name;
    Role role = Role::Client;
    std::string spec_ref;          // empty for clients and the sink
    std::uint32_t position = 0;    // layer index or pipeline stage
    std::variant<std::monostate, ComponentSpec, ClientConfig> config;
    std::string service;                                          // Service instances
    std::map<std::string, std::vector<std::uint32_t>> catalogue;  // Directories
    std::set<std::string> can_handle;                             // Peers
    std::uint32_t target_degree = 0;                              // Peers
    bool input = false;
    bool last = false;
};

/// Style-shaped component graph. Nodes are indexed by their local ordinal;
/// edges point in the direction requests travel (peer edges come in pairs).
struct Topology {
    Style style = Style::Layered;
    std::string system;
    std::vector<Node> nodes;
    std::map<std::uint32_t, std::set<std::uint32_t>> edges;

    const Node* find(std::string_view name) const;
    void add_edge(std::uint32_t from, std::uint32_t to) { edges[from].insert(to); }
    bool has_edge(std::uint32_t from, std::uint32_t to) const;
    std::set<std::uint32_t> out_of(std::uint32_t n) const;
    std::set<std::uint32_t> into(std::uint32_t n) const;
    std::vector<std::uint32_t> of_role(Role role) const;
};

class TopologyError : public Error {
public:
    enum class Code : std::uint8_t { TooFewLayers, BadReplication, EmptyCatalogue, BadWorkerBounds, DegreeInfeasible, BadSpec };
    TopologyError(Code code, const std::string& what) : Error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

Topology build_layered(std::string system, const std::vector<NamedSpec>& layers, const std::vector<ClientDecl>& clients);

/// `replication` maps stage index to replica count; stages absent from it have one filter.
Topology build_pipeline(std::string system, const std::vector<NamedSpec>& filters,
                        const std::map<std::size_t, std::uint32_t>& replication,
                        const std::vector<ClientDecl>& clients);

struct DirectoryDecl {
    NamedSpec spec;
    std::vector<std::string> catalogue;  // service names this directory offers
};
struct ServiceDecl {
    NamedSpec spec;
    std::uint32_t instances = 1;
};

Topology build_client_server(std::string system, const std::vector<ClientDecl>& clients,
                             const std::vector<DirectoryDecl>& directories,
                             const std::map<std::string, ServiceDecl>& services);

Topology build_leader_follower(std::string system, const std::vector<ClientDecl>& clients,
                               std::uint32_t initial_workers, const NamedSpec& leader, const NamedSpec& worker);

/// Ring plus random chords until every peer has degree >= target_degree.
Topology build_p2p(std::string system, std::uint32_t peers, std::uint32_t target_degree, const NamedSpec& peer,
                   const std::map<std::uint32_t, std::set<std::string>>& capabilities,
                   const std::vector<ClientDecl>& clients, Pcg32& rng);

/// Style rules; empty result means valid.
std::vector<std::string> validate_topology(const Topology& t);

/// Nodes whose wiring names `node` (prev/next, stage lists, catalogues, rosters, neighbours, entries).
std::set<std::uint32_t> references(const Topology& t, std::uint32_t node);

struct ImpactSet {
    std::uint32_t changed = 0;
    std::set<std::uint32_t> affected;
};

/// {changed} plus every non-client component whose wiring references it.
ImpactSet change_impact(const Topology& t, std::string_view changed);
ImpactSet change_impact(const Topology& t, std::uint32_t changed);

bool is_connected_overlay(const Topology& t);

}  // namespace archsim
