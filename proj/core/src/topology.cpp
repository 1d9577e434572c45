#include "archsim/topology.hpp"

#include <algorithm>
#include <deque>

namespace archsim {

const char* to_string(Style style) {
    switch (style) {
        case Style::Layered: return "layered";
        case Style::Pipeline: return "pipeline";
        case Style::ClientServer: return "client_server";
        case Style::LeaderFollower: return "leader_follower";
        case Style::PeerToPeer: return "p2p";
    }
    return "?";
}

std::optional<Style> style_from_string(std::string_view text) {
    for (Style s : {Style::Layered, Style::Pipeline, Style::ClientServer, Style::LeaderFollower, Style::PeerToPeer})
        if (text == to_string(s)) return s;
    return std::nullopt;
}

Role spec_role(const ComponentSpec& spec) {
    struct V {
        Role operator()(const LayerSpec&) const { return Role::Layer; }
        Role operator()(const FilterSpec&) const { return Role::Filter; }
        Role operator()(const DirectorySpec&) const { return Role::Directory; }
        Role operator()(const ServiceSpec&) const { return Role::Service; }
        Role operator()(const LeaderSpec&) const { return Role::Leader; }
        Role operator()(const WorkerSpec&) const { return Role::Worker; }
        Role operator()(const PeerSpec&) const { return Role::Peer; }
    };
    return std::visit(V{}, spec);
}

const Node* Topology::find(std::string_view name) const {
    for (const auto& n : nodes)
        if (n.name == name) return &n;
    return nullptr;
}

bool Topology::has_edge(std::uint32_t from, std::uint32_t to) const {
    const auto it = edges.find(from);
    return it != edges.end() && it->second.contains(to);
}

std::set<std::uint32_t> Topology::out_of(std::uint32_t n) const {
    const auto it = edges.find(n);
    return it == edges.end() ? std::set<std::uint32_t>{} : it->second;
}

std::set<std::uint32_t> Topology::into(std::uint32_t n) const {
    std::set<std::uint32_t> out;
    for (const auto& [from, tos] : edges)
        if (tos.contains(n)) out.insert(from);
    return out;
}

std::vector<std::uint32_t> Topology::of_role(Role role) const {
    std::vector<std::uint32_t> out;
    for (const auto& n : nodes)
        if (n.role == role) out.push_back(n.id.ordinal);
    return out;
}

namespace {

std::string qualify(const std::string& system, const std::string& local) {
    return system.empty() ? local : system + "." + local;
}

void require_role(const NamedSpec& s, Role role) {
    if (spec_role(s.spec) != role)
        throw TopologyError(TopologyError::Code::BadSpec,
                            "spec '" + s.name + "' is a " + to_string(spec_role(s.spec)) + ", expected " + to_string(role));
}

std::uint32_t add_node(Topology& t, std::string local, Role role) {
    Node n;
    n.id = ComponentId{static_cast<std::uint32_t>(t.nodes.size()), 0};
    n.name = qualify(t.system, local);
    n.role = role;
    t.nodes.push_back(std::move(n));
    return t.nodes.back().id.ordinal;
}

std::uint32_t add_spec_node(Topology& t, std::string local, const NamedSpec& spec) {
    const auto id = add_node(t, std::move(local), spec_role(spec.spec));
    t.nodes[id].spec_ref = spec.name;
    t.nodes[id].config = spec.spec;
    return id;
}

/// Adds the clients; `entry_of(i, decl)` returns the entry nodes of client i.
template <class EntryFn>
void add_clients(Topology& t, const std::vector<ClientDecl>& clients, EntryFn&& entry_of) {
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const auto id = add_node(t, clients[i].name, Role::Client);
        t.nodes[id].config = clients[i].cfg;
        for (std::uint32_t e : entry_of(i, clients[i])) t.add_edge(id, e);
    }
}

}  // namespace

Topology build_layered(std::string system, const std::vector<NamedSpec>& layers, const std::vector<ClientDecl>& clients) {
    if (layers.size() < 2)
        throw TopologyError(TopologyError::Code::TooFewLayers, "a layered system needs at least 2 layers");
    Topology t;
    t.style = Style::Layered;
    t.system = std::move(system);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        require_role(layers[i], Role::Layer);
        const auto id = add_spec_node(t, "layer" + std::to_string(i), layers[i]);
        t.nodes[id].position = static_cast<std::uint32_t>(i);
        t.nodes[id].input = i == 0;
        t.nodes[id].last = i + 1 == layers.size();
        if (i > 0) t.add_edge(id - 1, id);
    }
    add_clients(t, clients, [](std::size_t, const ClientDecl&) { return std::vector<std::uint32_t>{0}; });
    return t;
}

Topology build_pipeline(std::string system, const std::vector<NamedSpec>& filters,
                        const std::map<std::size_t, std::uint32_t>& replication,
                        const std::vector<ClientDecl>& clients) {
    if (filters.empty()) throw TopologyError(TopologyError::Code::BadSpec, "a pipeline needs at least 1 filter");
    for (const auto& [stage, count] : replication) {
        if (stage >= filters.size())
            throw TopologyError(TopologyError::Code::BadReplication, "replication names missing stage " + std::to_string(stage));
        if (count < 1)
            throw TopologyError(TopologyError::Code::BadReplication, "replication of stage " + std::to_string(stage) + " must be >= 1");
    }
    Topology t;
    t.style = Style::Pipeline;
    t.system = std::move(system);
    std::vector<std::vector<std::uint32_t>> stages(filters.size());
    for (std::size_t s = 0; s < filters.size(); ++s) {
        require_role(filters[s], Role::Filter);
        const auto it = replication.find(s);
        const std::uint32_t count = it == replication.end() ? 1 : it->second;
        for (std::uint32_t r = 0; r < count; ++r) {
            std::string local = "filter" + std::to_string(s);
            if (count > 1) local += "." + std::to_string(r);
            const auto id = add_spec_node(t, local, filters[s]);
            t.nodes[id].position = static_cast<std::uint32_t>(s);
            t.nodes[id].input = s == 0;
            t.nodes[id].last = s + 1 == filters.size();
            stages[s].push_back(id);
        }
    }
    const auto sink = add_node(t, "sink", Role::Sink);
    t.nodes[sink].position = static_cast<std::uint32_t>(filters.size());
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::uint32_t from : stages[s]) {
            if (s + 1 < stages.size())
                for (std::uint32_t to : stages[s + 1]) t.add_edge(from, to);
            else
                t.add_edge(from, sink);
        }
    add_clients(t, clients, [&](std::size_t, const ClientDecl&) { return stages[0]; });
    return t;
}

Topology build_client_server(std::string system, const std::vector<ClientDecl>& clients,
                             const std::vector<DirectoryDecl>& directories,
                             const std::map<std::string, ServiceDecl>& services) {
    if (directories.empty()) throw TopologyError(TopologyError::Code::BadSpec, "client-server needs at least 1 directory");
    if (services.empty()) throw TopologyError(TopologyError::Code::BadSpec, "client-server needs at least 1 service");
    Topology t;
    t.style = Style::ClientServer;
    t.system = std::move(system);
    for (std::size_t i = 0; i < directories.size(); ++i) {
        require_role(directories[i].spec, Role::Directory);
        add_spec_node(t, "dir" + std::to_string(i), directories[i].spec);
    }
    std::map<std::string, std::vector<std::uint32_t>> instances;
    for (const auto& [name, decl] : services) {
        require_role(decl.spec, Role::Service);
        for (std::uint32_t k = 0; k < decl.instances; ++k) {
            const auto id = add_spec_node(t, name + "." + std::to_string(k), decl.spec);
            t.nodes[id].service = name;
            instances[name].push_back(id);
        }
    }
    for (std::uint32_t d = 0; d < directories.size(); ++d) {
        for (const auto& svc : directories[d].catalogue) {
            const auto it = instances.find(svc);
            if (it == instances.end() || it->second.empty())
                throw TopologyError(TopologyError::Code::EmptyCatalogue,
                                    "directory " + t.nodes[d].name + " lists service '" + svc + "' with no instances");
            t.nodes[d].catalogue[svc] = it->second;
            for (std::uint32_t inst : it->second) t.add_edge(d, inst);
        }
    }
    const auto ndirs = static_cast<std::uint32_t>(directories.size());
    add_clients(t, clients, [&](std::size_t i, const ClientDecl& c) {
        std::vector<std::uint32_t> entry;
        for (std::uint32_t e : c.entry) {
            if (e >= ndirs) throw TopologyError(TopologyError::Code::BadSpec, "client entry names missing directory " + std::to_string(e));
            entry.push_back(e);
        }
        if (entry.empty()) entry.push_back(static_cast<std::uint32_t>(i % ndirs));
        return entry;
    });
    return t;
}

Topology build_leader_follower(std::string system, const std::vector<ClientDecl>& clients,
                               std::uint32_t initial_workers, const NamedSpec& leader, const NamedSpec& worker) {
    require_role(leader, Role::Leader);
    require_role(worker, Role::Worker);
    const auto& cfg = std::get<LeaderSpec>(leader.spec).cfg;
    if (cfg.min_workers < 1 || cfg.min_workers > cfg.max_workers || initial_workers < cfg.min_workers ||
        initial_workers > cfg.max_workers) {
        throw TopologyError(TopologyError::Code::BadWorkerBounds,
                            "need 1 <= min_workers <= initial_workers <= max_workers, got " +
                                std::to_string(cfg.min_workers) + " <= " + std::to_string(initial_workers) +
                                " <= " + std::to_string(cfg.max_workers));
    }
    Topology t;
    t.style = Style::LeaderFollower;
    t.system = std::move(system);
    const auto l = add_spec_node(t, "leader", leader);
    for (std::uint32_t k = 0; k < initial_workers; ++k) t.add_edge(l, add_spec_node(t, "worker" + std::to_string(k), worker));
    add_clients(t, clients, [&](std::size_t, const ClientDecl&) { return std::vector<std::uint32_t>{l}; });
    return t;
}

namespace {

using Adjacency = std::vector<std::set<std::uint32_t>>;

/// One greedy chord round: repeatedly join the lowest deficient peer to a random
/// non-neighbour, preferring other deficient peers. Returns how many chords joined
/// a peer that already had enough neighbours.
std::uint32_t add_chords(Adjacency& adj, std::uint32_t d, Pcg32& rng) {
    const auto n = static_cast<std::uint32_t>(adj.size());
    std::uint32_t wasteful = 0;
    for (;;) {
        std::optional<std::uint32_t> a;
        for (std::uint32_t i = 0; i < n && !a; ++i)
            if (adj[i].size() < d) a = i;
        if (!a) return wasteful;
        std::vector<std::uint32_t> preferred;
        std::vector<std::uint32_t> fallback;
        for (std::uint32_t b = 0; b < n; ++b) {
            if (b == *a || adj[*a].contains(b)) continue;
            (adj[b].size() < d ? preferred : fallback).push_back(b);
        }
        const auto& pool = preferred.empty() ? fallback : preferred;
        if (pool.empty()) return wasteful;  // a is adjacent to everyone already
        if (preferred.empty()) ++wasteful;
        const std::uint32_t b = pool[rng.bounded(static_cast<std::uint32_t>(pool.size()))];
        adj[*a].insert(b);
        adj[b].insert(*a);
    }
}

}  // namespace

Topology build_p2p(std::string system, std::uint32_t peers, std::uint32_t target_degree, const NamedSpec& peer,
                   const std::map<std::uint32_t, std::set<std::string>>& capabilities,
                   const std::vector<ClientDecl>& clients, Pcg32& rng) {
    if (peers < 2 || target_degree < 1 || target_degree >= peers)
        throw TopologyError(TopologyError::Code::DegreeInfeasible,
                            "need n >= 2 and 1 <= d < n, got n=" + std::to_string(peers) + " d=" + std::to_string(target_degree));
    require_role(peer, Role::Peer);
    for (const auto& [idx, _] : capabilities)
        if (idx >= peers) throw TopologyError(TopologyError::Code::BadSpec, "capabilities name missing peer " + std::to_string(idx));

    Adjacency ring(peers);
    for (std::uint32_t i = 0; i < peers; ++i) {
        const std::uint32_t j = (i + 1) % peers;
        ring[i].insert(j);
        ring[j].insert(i);
    }
    // A few greedy attempts; keep the first one that never over-connects a peer.
    Adjacency adj;
    for (int attempt = 0; attempt < 32; ++attempt) {
        adj = ring;
        if (add_chords(adj, target_degree, rng) == 0) break;
    }

    Topology t;
    t.style = Style::PeerToPeer;
    t.system = std::move(system);
    for (std::uint32_t i = 0; i < peers; ++i) {
        const auto id = add_spec_node(t, "peer" + std::to_string(i), peer);
        t.nodes[id].target_degree = target_degree;
        if (const auto it = capabilities.find(i); it != capabilities.end()) t.nodes[id].can_handle = it->second;
    }
    for (std::uint32_t i = 0; i < peers; ++i)
        for (std::uint32_t j : adj[i]) t.add_edge(i, j);
    add_clients(t, clients, [&](std::size_t i, const ClientDecl& c) {
        std::vector<std::uint32_t> entry;
        for (std::uint32_t e : c.entry) {
            if (e >= peers) throw TopologyError(TopologyError::Code::BadSpec, "client entry names missing peer " + std::to_string(e));
            entry.push_back(e);
        }
        if (entry.empty()) entry.push_back(static_cast<std::uint32_t>(i % peers));
        return entry;
    });
    return t;
}

// ---------------------------------------------------------------- validation

bool is_connected_overlay(const Topology& t) {
    const auto peers = t.of_role(Role::Peer);
    if (peers.empty()) return true;
    std::set<std::uint32_t> seen{peers[0]};
    std::deque<std::uint32_t> todo{peers[0]};
    while (!todo.empty()) {
        const auto n = todo.front();
        todo.pop_front();
        for (std::uint32_t m : t.out_of(n))
            if (t.nodes[m].role == Role::Peer && seen.insert(m).second) todo.push_back(m);
    }
    return seen.size() == peers.size();
}

std::vector<std::string> validate_topology(const Topology& t) {
    std::vector<std::string> v;
    auto name = [&](std::uint32_t i) { return i < t.nodes.size() ? t.nodes[i].name : "#" + std::to_string(i); };
    for (const auto& [from, tos] : t.edges)
        for (std::uint32_t to : tos)
            if (from >= t.nodes.size() || to >= t.nodes.size()) v.push_back("dangling edge " + name(from) + " -> " + name(to));
    if (!v.empty()) return v;

    auto role = [&](std::uint32_t i) { return t.nodes[i].role; };
    auto each_edge = [&](auto&& fn) {
        for (const auto& [from, tos] : t.edges)
            for (std::uint32_t to : tos) fn(from, to);
    };

    switch (t.style) {
        case Style::Layered: {
            const auto layers = t.of_role(Role::Layer);
            if (layers.size() < 2) v.push_back("fewer than 2 layers");
            each_edge([&](std::uint32_t a, std::uint32_t b) {
                if (role(a) == Role::Client) {
                    if (role(b) != Role::Layer || !t.nodes[b].input) v.push_back("client edge to non-input " + name(b));
                } else if (role(a) != Role::Layer || role(b) != Role::Layer ||
                           t.nodes[b].position != t.nodes[a].position + 1) {
                    v.push_back("non-adjacent edge " + name(a) + " -> " + name(b));
                }
            });
            for (std::uint32_t l : layers) {
                const bool last = t.nodes[l].last;
                if (!last && t.out_of(l).size() != 1) v.push_back("layer " + name(l) + " must have exactly one next");
            }
            break;
        }
        case Style::Pipeline: {
            const auto sinks = t.of_role(Role::Sink);
            if (sinks.size() != 1) v.push_back("pipeline needs exactly one sink");
            each_edge([&](std::uint32_t a, std::uint32_t b) {
                if (role(a) == Role::Client) {
                    if (role(b) != Role::Filter || !t.nodes[b].input) v.push_back("client edge to non-input " + name(b));
                    return;
                }
                const bool ok = role(a) == Role::Filter &&
                                ((role(b) == Role::Filter && t.nodes[b].position == t.nodes[a].position + 1) ||
                                 (role(b) == Role::Sink && t.nodes[a].last));
                if (!ok) v.push_back("non-adjacent edge " + name(a) + " -> " + name(b));
            });
            for (std::uint32_t f : t.of_role(Role::Filter))
                if (t.out_of(f).empty()) v.push_back("filter " + name(f) + " has no output");
            break;
        }
        case Style::ClientServer: {
            if (t.of_role(Role::Directory).empty()) v.push_back("no directory");
            for (std::uint32_t d : t.of_role(Role::Directory)) {
                for (const auto& [svc, insts] : t.nodes[d].catalogue) {
                    if (insts.empty()) v.push_back("directory " + name(d) + " cannot resolve '" + svc + "'");
                    for (std::uint32_t i : insts)
                        if (i >= t.nodes.size() || role(i) != Role::Service || t.nodes[i].service != svc)
                            v.push_back("directory " + name(d) + " cannot resolve '" + svc + "'");
                }
            }
            each_edge([&](std::uint32_t a, std::uint32_t b) {
                const bool ok = (role(a) == Role::Client && role(b) == Role::Directory) ||
                                (role(a) == Role::Directory && role(b) == Role::Service);
                if (!ok) v.push_back("unexpected edge " + name(a) + " -> " + name(b));
            });
            break;
        }
        case Style::LeaderFollower: {
            const auto leaders = t.of_role(Role::Leader);
            if (leaders.size() != 1) v.push_back("expected a single leader, found " + std::to_string(leaders.size()));
            each_edge([&](std::uint32_t a, std::uint32_t b) {
                const bool ok = (role(a) == Role::Client && role(b) == Role::Leader) ||
                                (role(a) == Role::Leader && role(b) == Role::Worker);
                if (!ok) v.push_back("unexpected edge " + name(a) + " -> " + name(b));
            });
            for (std::uint32_t w : t.of_role(Role::Worker))
                if (t.into(w).size() != 1) v.push_back("worker " + name(w) + " must belong to exactly one leader");
            break;
        }
        case Style::PeerToPeer: {
            each_edge([&](std::uint32_t a, std::uint32_t b) {
                if (role(a) == Role::Client) {
                    if (role(b) != Role::Peer) v.push_back("client edge to non-peer " + name(b));
                } else if (role(a) != Role::Peer || role(b) != Role::Peer) {
                    v.push_back("unexpected edge " + name(a) + " -> " + name(b));
                } else if (a == b) {
                    v.push_back("self loop on " + name(a));
                } else if (!t.has_edge(b, a)) {
                    v.push_back("asymmetric neighbour " + name(a) + " -> " + name(b));
                }
            });
            if (!is_connected_overlay(t)) v.push_back("overlay is not connected");
            break;
        }
    }
    return v;
}

std::set<std::uint32_t> references(const Topology& t, std::uint32_t node) {
    auto refs = t.out_of(node);
    for (std::uint32_t n : t.into(node)) refs.insert(n);
    refs.erase(node);
    return refs;
}

ImpactSet change_impact(const Topology& t, std::uint32_t changed) {
    if (changed >= t.nodes.size()) throw UnknownComponent("#" + std::to_string(changed));
    ImpactSet out;
    out.changed = changed;
    out.affected.insert(changed);
    // Clients and the output sink sit outside the system's wiring.
    for (std::uint32_t n : references(t, changed))
        if (t.nodes[n].role != Role::Client && t.nodes[n].role != Role::Sink) out.affected.insert(n);
    return out;
}

ImpactSet change_impact(const Topology& t, std::string_view changed) {
    const Node* n = t.find(changed);
    if (!n) throw UnknownComponent(std::string(changed));
    return change_impact(t, n->id.ordinal);
}

}  // namespace archsim
