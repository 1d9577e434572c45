#include "archsim/simulation.hpp"

#include <algorithm>
#include <sstream>

namespace archsim {

namespace {

Scenario with_overrides(Scenario s, const Simulation::Overrides& o) {
    if (o.seed) s.seed = *o.seed;
    if (o.duration) {
        if (*o.duration == 0 || *o.duration <= s.warmup) throw SchemaError("/duration_us", "must be > warmup_us");
        s.duration = *o.duration;
    }
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        out.push_back(text.substr(0, nl));
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return out;
}

}  // namespace

Simulation::Simulation(Scenario scenario, Overrides overrides)
    : scenario_(with_overrides(std::move(scenario), overrides)), engine_(scenario_.seed) {
    engine_.set_link_latency(scenario_.link_latency);
    engine_.trace().add_observer([this](const TraceRecord& r) { ledger_.observe(r); });
    build();
}

void Simulation::build() {
    topologies_ = build_topologies(scenario_);
    for (const auto& t : topologies_) {
        const auto offset = static_cast<std::uint32_t>(engine_.component_count());
        offsets_.push_back(offset);
        auto eid = [&](std::uint32_t local) { return ComponentId{offset + local, 0}; };
        auto eids = [&](const auto& locals) {
            std::vector<ComponentId> out;
            for (std::uint32_t l : locals) out.push_back(eid(l));
            return out;
        };
        auto non_clients = [&](const std::set<std::uint32_t>& s) {
            std::vector<std::uint32_t> out;
            for (std::uint32_t n : s)
                if (t.nodes[n].role != Role::Client) out.push_back(n);
            return out;
        };

        std::vector<std::pair<ComponentId, WorkerState>> templates;
        for (const auto& node : t.nodes) {
            const std::uint32_t local = node.id.ordinal;
            BehaviorState st;
            switch (node.role) {
                case Role::Layer: {
                    const auto& spec = std::get<LayerSpec>(std::get<ComponentSpec>(node.config));
                    LayerState s;
                    s.proc_in = spec.proc_in;
                    s.proc_out = spec.proc_out;
                    s.downstream_timeout = spec.downstream_timeout;
                    if (const auto prev = non_clients(t.into(local)); !prev.empty()) s.prev = eid(prev.front());
                    if (const auto next = t.out_of(local); !next.empty()) s.next = eid(*next.begin());
                    st = s;
                    break;
                }
                case Role::Filter: {
                    FilterState s;
                    s.proc = std::get<FilterSpec>(std::get<ComponentSpec>(node.config)).proc;
                    s.next = eids(t.out_of(local));
                    s.accept_from = eids(non_clients(t.into(local)));
                    s.last = node.last;
                    st = s;
                    break;
                }
                case Role::Sink: st = SinkState{}; break;
                case Role::Directory: {
                    DirectoryState s;
                    s.route_delay = std::get<DirectorySpec>(std::get<ComponentSpec>(node.config)).route_delay;
                    for (const auto& [svc, insts] : node.catalogue) s.catalogue[svc] = eids(insts);
                    st = s;
                    break;
                }
                case Role::Service: {
                    ServiceState s;
                    s.service_name = node.service;
                    s.proc = std::get<ServiceSpec>(std::get<ComponentSpec>(node.config)).proc;
                    st = s;
                    break;
                }
                case Role::Leader: {
                    LeaderState s;
                    s.cfg = std::get<LeaderSpec>(std::get<ComponentSpec>(node.config)).cfg;
                    for (std::uint32_t w : t.out_of(local)) {
                        LeaderState::WorkerView v;
                        v.id = eid(w);
                        s.workers.push_back(v);
                    }
                    st = s;
                    break;
                }
                case Role::Worker: {
                    WorkerState s;
                    s.proc = std::get<WorkerSpec>(std::get<ComponentSpec>(node.config)).proc;
                    s.leader = eid(*t.into(local).begin());
                    st = s;
                    if (templates.empty()) templates.emplace_back(s.leader, s);
                    break;
                }
                case Role::Peer: {
                    const auto& spec = std::get<PeerSpec>(std::get<ComponentSpec>(node.config));
                    PeerState s;
                    for (std::uint32_t n : non_clients(t.out_of(local))) s.neighbours.insert(eid(n));
                    s.can_handle = node.can_handle;
                    s.proc = spec.proc;
                    s.forward_fanout = spec.forward_fanout;
                    s.maintenance_period = spec.maintenance_period;
                    s.churn_threshold = probability_threshold(spec.churn);
                    s.target_degree = node.target_degree;
                    st = s;
                    break;
                }
                case Role::Client: {
                    ClientState s;
                    s.cfg = std::get<ClientConfig>(node.config);
                    s.entry_points = eids(t.out_of(local));
                    st = s;
                    break;
                }
            }
            engine_.add_component(node.name, t.system, st, [st] { return st; });
        }

        for (std::uint32_t l : t.of_role(Role::Leader)) {
            WorkerState tmpl;
            if (!templates.empty()) {
                tmpl = templates.front().second;
            } else {
                // A leader with no initial workers still needs the worker card.
                for (const auto& d : scenario_.systems)
                    if (d.name == t.system) tmpl.proc = std::get<WorkerSpec>(scenario_.spec_library.at(d.worker)).proc;
            }
            tmpl.leader = eid(l);
            const auto workers = static_cast<std::uint32_t>(t.of_role(Role::Worker).size());
            engine_.set_worker_template(eid(l), tmpl, t.system + ".worker", workers);
        }
    }
}

void Simulation::start() {
    if (started_) return;
    started_ = true;
    nlohmann::json fields{{"format", kTraceFormat}, {"scenario", to_json(scenario_)}, {"seed", scenario_.seed}};
    engine_.trace().emit(TraceRecord{kTimeZero, 0, "header", "kernel", std::move(fields)});
    for (const auto& f : scenario_.faults) schedule_fault(f, engine_);
    for (const auto& c : scenario_.commands) engine_.schedule_command(c.cmd, c.at, "schedule");
}

void Simulation::inject(const Command& cmd, SimTime at) { engine_.schedule_command(cmd, at, "conductor"); }

void Simulation::finish(SimTime horizon) {
    if (finished_) return;
    if (!started_) start();
    engine_.run_until(horizon);
    engine_.record_at(horizon, "end", "kernel", {{"events", engine_.events_processed()}});
    ledger_.finish(horizon);
    finished_ = true;
}

RunOutput run_scenario(const Scenario& scenario, Simulation::Overrides overrides) {
    Simulation sim(scenario, overrides);
    RunOutput out;
    sim.engine().trace().add_line_sink([&](const std::string& line) {
        out.trace += line;
        out.trace += '\n';
    });
    sim.start();
    sim.finish(SimTime{sim.scenario().duration});
    out.ledger = sim.ledger();
    out.effective_scenario = emit_effective(sim.scenario());
    out.events = sim.engine().events_processed();
    return out;
}

std::string replay_trace(std::string_view trace_text) {
    const auto lines = split_lines(trace_text);
    if (lines.empty()) throw MalformedTrace(1, "empty trace");
    // A header that no longer reads back is the first differing line.
    TraceRecord header;
    Scenario scenario;
    try {
        header = TraceRecord::parse(lines[0], 1);
        if (header.type != "header" || !header.has("scenario") || !header.fields["seed"].is_number_unsigned() ||
            header.fields["format"] != kTraceFormat)
            throw ReplayDivergence(1);
        scenario = scenario_from_json(header.fields["scenario"]);
    } catch (const ReplayDivergence&) {
        throw;
    } catch (const std::exception&) {
        throw ReplayDivergence(1);
    }

    struct Injection {
        std::uint64_t pos;
        std::uint64_t seq;
        SimTime t;
        Command cmd;
        std::size_t line;
    };
    std::vector<Injection> injections;
    std::optional<SimTime> horizon;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        // Lines that no longer parse are left for the byte comparison to report.
        TraceRecord r;
        try {
            r = TraceRecord::parse(lines[i], i + 1);
        } catch (const MalformedTrace&) {
            continue;
        }
        if (r.type == "end" && r.comp == "kernel") horizon = r.t;
        if (r.type != "control" || !r.fields.contains("source") || r.fields["source"] != "conductor") continue;
        try {
            injections.push_back({r.fields.at("pos").get<std::uint64_t>(), r.seq, r.t,
                                  Command::from_json(r.fields.at("cmd")), i + 1});
        } catch (const std::exception&) {
            throw ReplayDivergence(i + 1);
        }
    }
    // Without a readable end marker the run goes to the scenario horizon and the comparison reports the spot.
    if (!horizon) horizon = SimTime{scenario.duration};
    std::stable_sort(injections.begin(), injections.end(),
                     [](const Injection& a, const Injection& b) { return std::tie(a.pos, a.seq) < std::tie(b.pos, b.seq); });

    Simulation::Overrides ov;
    ov.seed = header.fields["seed"].get<std::uint64_t>();
    Simulation sim(scenario, ov);
    std::string regenerated;
    sim.engine().trace().add_line_sink([&](const std::string& line) {
        regenerated += line;
        regenerated += '\n';
    });
    sim.start();
    for (const auto& inj : injections) {
        while (sim.engine().events_processed() < inj.pos && sim.engine().step()) {
        }
        if (sim.engine().events_processed() != inj.pos || inj.t < sim.engine().now()) throw ReplayDivergence(inj.line);
        sim.inject(inj.cmd, inj.t);
    }
    if (*horizon < sim.engine().now()) throw ReplayDivergence(lines.size());
    sim.finish(*horizon);

    const auto again = split_lines(regenerated);
    const std::size_t n = std::max(lines.size(), again.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= lines.size() || i >= again.size() || lines[i] != again[i]) throw ReplayDivergence(i + 1);
    }
    return regenerated;
}

}  // namespace archsim
