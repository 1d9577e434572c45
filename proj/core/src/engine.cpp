#include "archsim/engine.hpp"

#include <cassert>

namespace archsim {

using nlohmann::json;

const char* to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::Crash: return "crash";
        case FaultKind::Restart: return "restart";
        case FaultKind::SetSilentDrop: return "silent_drop";
    }
    return "?";
}

const char* to_string(ComponentStatus status) {
    switch (status) {
        case ComponentStatus::Alive: return "alive";
        case ComponentStatus::Crashed: return "crashed";
        case ComponentStatus::Stopped: return "stopped";
    }
    return "?";
}

class Engine::SlotContext final : public Context {
public:
    SlotContext(Engine& e, std::uint32_t ordinal) : e_(e), ordinal_(ordinal) {}

    SimTime now() const override { return e_.now_; }
    ComponentId self() const override { return e_.id_of(ordinal_); }
    Pcg32& rng() override { return e_.slots_[ordinal_].rng; }
    std::uint64_t new_request_id() override { return e_.next_request_id_++; }
    ComponentId reserve_component() override {
        const auto ordinal = static_cast<std::uint32_t>(e_.slots_.size() + e_.reservations_);
        ++e_.reservations_;
        return ComponentId{ordinal, 0};
    }
    bool is_alive(ComponentId id) const override {
        return id.valid() && id.ordinal < e_.slots_.size() &&
               e_.slots_[id.ordinal].status == ComponentStatus::Alive;
    }
    std::optional<Role> role_of(ComponentId id) const override {
        if (!id.valid()) return std::nullopt;
        if (id.ordinal < e_.slots_.size()) return archsim::role_of(e_.slots_[id.ordinal].state);
        if (id.ordinal < e_.slots_.size() + e_.reservations_) return Role::Worker;
        return std::nullopt;
    }
    std::vector<ComponentId> live_peers() const override {
        std::vector<ComponentId> out;
        const std::string& system = e_.slots_[ordinal_].system;
        for (std::uint32_t i = 0; i < e_.slots_.size(); ++i) {
            const Slot& s = e_.slots_[i];
            if (s.system == system && s.status == ComponentStatus::Alive && std::holds_alternative<PeerState>(s.state))
                out.push_back(e_.id_of(i));
        }
        return out;
    }
    std::string name_of(ComponentId id) const override {
        if (id.valid() && id.ordinal < e_.slots_.size()) return e_.slots_[id.ordinal].name;
        return "?";
    }

private:
    Engine& e_;
    std::uint32_t ordinal_;
};

Engine::Engine(std::uint64_t master_seed)
    : master_seed_(master_seed), workload_rng_(Pcg32::derive(master_seed, kWorkloadStream)) {}

// ---------------------------------------------------------------- registry

ComponentId Engine::add_component(std::string name, std::string system, BehaviorState initial, Factory factory) {
    const auto ordinal = static_cast<std::uint32_t>(slots_.size());
    if (by_name_.contains(name)) throw Error("duplicate component name: " + name);
    Slot s;
    s.name = name;
    s.system = std::move(system);
    s.state = std::move(initial);
    s.factory = std::move(factory);
    s.rng = Pcg32::derive(master_seed_, ordinal);
    slots_.push_back(std::move(s));
    by_name_.emplace(std::move(name), ordinal);
    schedule_start(ordinal, 0);
    return ComponentId{ordinal, 0};
}

void Engine::set_worker_template(ComponentId leader, WorkerState tmpl, std::string name_prefix,
                                 std::uint32_t first_index) {
    Slot& s = slot(leader);
    s.worker_template = std::move(tmpl);
    s.worker_prefix = std::move(name_prefix);
    s.next_worker_index = first_index;
}

std::optional<ComponentId> Engine::find(std::string_view name) const {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return id_of(it->second);
}

ComponentId Engine::current_id(std::uint32_t ordinal) const {
    if (ordinal >= slots_.size()) throw UnknownComponent("#" + std::to_string(ordinal));
    return id_of(ordinal);
}

ComponentId Engine::id_of(std::uint32_t ordinal) const { return ComponentId{ordinal, slots_[ordinal].generation}; }

Engine::Slot& Engine::slot(ComponentId id) {
    if (!id.valid() || id.ordinal >= slots_.size()) throw UnknownComponent("#" + std::to_string(id.ordinal));
    return slots_[id.ordinal];
}

const Engine::Slot& Engine::slot(ComponentId id) const {
    if (!id.valid() || id.ordinal >= slots_.size()) throw UnknownComponent("#" + std::to_string(id.ordinal));
    return slots_[id.ordinal];
}

const std::string& Engine::name_of(ComponentId id) const { return slot(id).name; }
const std::string& Engine::system_of(ComponentId id) const { return slot(id).system; }
Role Engine::role(ComponentId id) const { return role_of(slot(id).state); }
ComponentStatus Engine::status(ComponentId id) const { return slot(id).status; }
const BehaviorState& Engine::state(ComponentId id) const { return slot(id).state; }

// ---------------------------------------------------------------- events

EventHandle Engine::schedule(SimEvent ev) {
    if (ev.time < now_) throw SchedulingInPast(ev.time, now_);
    ev.seq = next_seq_++;
    const EventHandle h{ev.time, ev.seq};
    queue_.emplace(QueueKey{ev.time.micros, ev.seq}, std::move(ev));
    return h;
}

bool Engine::cancel(EventHandle handle) { return queue_.erase(QueueKey{handle.time.micros, handle.seq}) > 0; }

std::optional<SimEvent> Engine::step() {
    if (queue_.empty()) return std::nullopt;
    auto node = queue_.extract(queue_.begin());
    SimEvent ev = std::move(node.mapped());
    now_ = ev.time;
    current_seq_ = ev.seq;
    ++processed_;
    dispatch(ev);
    if (after_event_) after_event_(ev);
    return ev;
}

std::uint64_t Engine::run_until(SimTime t) {
    if (t < now_) throw SchedulingInPast(t, now_);
    std::uint64_t n = 0;
    while (!queue_.empty() && queue_.begin()->second.time <= t) {
        step();
        ++n;
    }
    return n;
}

std::optional<SimTime> Engine::next_event_time() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.begin()->second.time;
}

std::uint32_t Engine::rng_next(std::uint32_t stream) {
    if (stream == kWorkloadStream) return workload_rng_.next();
    if (stream >= slots_.size()) throw UnknownStream(stream);
    return slots_[stream].rng.next();
}

void Engine::dispatch(const SimEvent& ev) {
    const bool control = std::holds_alternative<SimEvent::ControlCmd>(ev.payload);
    if (!control && (!ev.target.valid() || ev.target.ordinal >= slots_.size())) {
        record("drop_unknown_target", "kernel", {{"target", ev.target.ordinal}});
        return;
    }
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, SimEvent::Deliver>) {
                deliver(ev, p);
            } else if constexpr (std::is_same_v<P, SimEvent::Timer>) {
                fire_timer(ev, p);
            } else if constexpr (std::is_same_v<P, SimEvent::Fault>) {
                try {
                    switch (p.kind) {
                        case FaultKind::Crash: crash(ev.target); break;
                        case FaultKind::Restart: restart(ev.target); break;
                        case FaultKind::SetSilentDrop: set_silent_drop(ev.target, p.on); break;
                    }
                } catch (const RestartOfLiveComponent&) {
                    record("fault_rejected", "kernel",
                           {{"target", slots_[ev.target.ordinal].name}, {"fault", to_string(p.kind)}, {"reason", "alive"}});
                }
            } else {
                run_control(ev, p);
            }
        },
        ev.payload);
}

namespace {

json message_fields(const Message& m) {
    json f{{"rid", m.request_id}, {"msg", to_string(m.kind)}};
    if (m.kind == MessageKind::Request) f["svc"] = m.service;
    if (m.kind == MessageKind::Failure) f["reason"] = m.reason;
    if (m.ttl_hops) f["ttl"] = *m.ttl_hops;
    if (m.fragment) f["frag"] = std::to_string(m.fragment->index) + "/" + std::to_string(m.fragment->of_total);
    return f;
}

}  // namespace

void Engine::deliver(const SimEvent& ev, const SimEvent::Deliver& d) {
    Slot& s = slots_[ev.target.ordinal];
    json f{{"from", slots_[d.from.ordinal].name}, {"rid", d.msg.request_id}, {"msg", to_string(d.msg.kind)}};
    if (s.status != ComponentStatus::Alive || s.generation != ev.target.generation) {
        f["to"] = s.name;
        record("drop_dead_target", "kernel", std::move(f));
        return;
    }
    record("recv", s.name, std::move(f));
    SlotContext ctx(*this, ev.target.ordinal);
    apply_actions(ev.target.ordinal, on_message(s.state, d.msg, d.from, ctx));
}

void Engine::fire_timer(const SimEvent& ev, const SimEvent::Timer& t) {
    Slot& s = slots_[ev.target.ordinal];
    if (s.status != ComponentStatus::Alive || s.generation != ev.target.generation) return;
    const auto it = s.timers.find(t.id);
    if (it == s.timers.end() || it->second.seq != ev.seq) return;
    s.timers.erase(it);
    SlotContext ctx(*this, ev.target.ordinal);
    apply_actions(ev.target.ordinal, on_timer(s.state, t.id, ctx));
}

void Engine::run_control(const SimEvent& /*ev*/, const SimEvent::ControlCmd& c) {
    std::string error;
    try {
        error = apply_command(c.cmd);
    } catch (const UnknownComponent&) {
        error = "unknown_component";
    } catch (const Error& e) {
        error = e.what();
    }
    json f{{"cmd", c.cmd.to_json()}, {"source", c.source}, {"pos", c.pos}};
    if (!error.empty()) f["error"] = error;
    record("control", "kernel", std::move(f));
}

void Engine::schedule_start(std::uint32_t ordinal, Micros delay) {
    const std::uint64_t id = timer::make(timer::Kind::Start);
    const auto h = schedule(SimEvent{now_ + delay, 0, id_of(ordinal), SimEvent::Timer{id}});
    slots_[ordinal].timers[id] = h;
}

void Engine::cancel_timers(Slot& s) {
    for (const auto& [id, h] : s.timers) cancel(h);
    s.timers.clear();
}

void Engine::apply_actions(std::uint32_t ordinal, Actions actions) {
    for (auto& action : actions) {
        std::visit(
            [&](auto& a) {
                using A = std::decay_t<decltype(a)>;
                Slot& self = slots_[ordinal];
                if constexpr (std::is_same_v<A, act::Send>) {
                    if (!a.to.valid() || a.to.ordinal >= slots_.size()) {
                        record("send_invalid", self.name, {{"rid", a.msg.request_id}});
                        return;
                    }
                    ++a.msg.hops;
                    const Micros latency = link_latency_.sample(self.rng) + a.delay;
                    json f = message_fields(a.msg);
                    f["to"] = slots_[a.to.ordinal].name;
                    record("send", self.name, std::move(f));
                    schedule(SimEvent{now_ + latency, 0, id_of(a.to.ordinal),
                                      SimEvent::Deliver{id_of(ordinal), std::move(a.msg)}});
                } else if constexpr (std::is_same_v<A, act::SetTimer>) {
                    if (const auto it = self.timers.find(a.timer); it != self.timers.end()) cancel(it->second);
                    const auto h = schedule(SimEvent{now_ + a.delay, 0, id_of(ordinal), SimEvent::Timer{a.timer}});
                    slots_[ordinal].timers[a.timer] = h;
                } else if constexpr (std::is_same_v<A, act::CancelTimer>) {
                    if (const auto it = self.timers.find(a.timer); it != self.timers.end()) {
                        cancel(it->second);
                        self.timers.erase(it);
                    }
                } else if constexpr (std::is_same_v<A, act::Spawn>) {
                    spawn_worker(id_of(ordinal), a.worker);
                } else if constexpr (std::is_same_v<A, act::Stop>) {
                    stop_component(a.worker, self.name);
                } else if constexpr (std::is_same_v<A, act::Link>) {
                    if (!a.peer.valid() || a.peer.ordinal >= slots_.size()) return;
                    const ComponentId me{ordinal, 0};
                    if (auto* other = std::get_if<PeerState>(&slots_[a.peer.ordinal].state)) {
                        if (a.add)
                            other->neighbours.insert(me);
                        else
                            other->neighbours.erase(me);
                    }
                    record(a.add ? "link" : "unlink", slots_[ordinal].name, {{"peer", slots_[a.peer.ordinal].name}});
                } else {
                    record(std::move(a.type), self.name, std::move(a.fields));
                }
            },
            action);
    }
    reservations_ = 0;
}

ComponentId Engine::spawn_worker(ComponentId leader, [[maybe_unused]] ComponentId reserved) {
    Slot& l = slots_[leader.ordinal];
    if (!l.worker_template) throw Error("leader has no worker template: " + l.name);
    assert(reserved.ordinal == slots_.size());
    WorkerState tmpl = *l.worker_template;
    tmpl.leader = ComponentId{leader.ordinal, 0};
    const std::string leader_name = l.name;
    const std::string name = l.worker_prefix + std::to_string(l.next_worker_index++);
    const ComponentId id = add_component(name, l.system, tmpl, [tmpl] { return BehaviorState{tmpl}; });
    record("spawn", name, {{"by", leader_name}});
    return id;
}

void Engine::stop_component(ComponentId target, const std::string& by) {
    Slot& s = slot(target);
    if (s.status == ComponentStatus::Stopped) return;
    s.status = ComponentStatus::Stopped;
    cancel_timers(s);
    record("stop", s.name, {{"by", by}});
}

void Engine::rebuild_roster(std::uint32_t leader_ordinal) {
    auto* l = std::get_if<LeaderState>(&slots_[leader_ordinal].state);
    if (!l) return;
    l->workers.clear();
    for (std::uint32_t i = 0; i < slots_.size(); ++i) {
        const Slot& s = slots_[i];
        const auto* w = std::get_if<WorkerState>(&s.state);
        if (w && w->leader.ordinal == leader_ordinal && s.status == ComponentStatus::Alive) {
            LeaderState::WorkerView v;
            v.id = ComponentId{i, 0};
            v.idle_since = now_;
            v.ready_at = now_;
            l->workers.push_back(v);
        }
    }
}

// ---------------------------------------------------------------- faults and commands

TraceRecord Engine::crash(ComponentId target) {
    Slot& s = slot(target);
    if (s.status != ComponentStatus::Alive) {
        json f{{"target", s.name}, {"fault", "crash"}, {"reason", to_string(s.status)}};
        record("fault_rejected", "kernel", f);
        return TraceRecord{now_, current_seq_, "fault_rejected", "kernel", f};
    }
    s.status = ComponentStatus::Crashed;
    cancel_timers(s);
    json f{{"gen", s.generation}};
    record("crash", s.name, f);
    return TraceRecord{now_, current_seq_, "crash", s.name, f};
}

TraceRecord Engine::restart(ComponentId target) {
    Slot& s = slot(target);
    if (s.status != ComponentStatus::Crashed) throw RestartOfLiveComponent(s.name);
    ++s.generation;
    s.status = ComponentStatus::Alive;
    s.state = s.factory();
    const std::uint32_t ordinal = target.ordinal;
    if (std::holds_alternative<LeaderState>(s.state)) rebuild_roster(ordinal);
    if (auto* p = std::get_if<PeerState>(&s.state)) {
        // Links are symmetric: the restarted peer knows whoever still knows it.
        p->neighbours.clear();
        for (std::uint32_t i = 0; i < slots_.size(); ++i) {
            const auto* other = std::get_if<PeerState>(&slots_[i].state);
            if (i != ordinal && other && other->neighbours.contains(ComponentId{ordinal, 0}))
                p->neighbours.insert(ComponentId{i, 0});
        }
    }
    json f{{"gen", s.generation}};
    record("restart", s.name, f);
    schedule_start(ordinal, 0);
    return TraceRecord{now_, current_seq_, "restart", slots_[ordinal].name, f};
}

TraceRecord Engine::set_silent_drop(ComponentId target, bool on) {
    Slot& s = slot(target);
    auto* p = std::get_if<PeerState>(&s.state);
    if (!p) {
        json f{{"target", s.name}, {"fault", "silent_drop"}, {"reason", "not_a_peer"}};
        record("fault_rejected", "kernel", f);
        return TraceRecord{now_, current_seq_, "fault_rejected", "kernel", f};
    }
    p->flag = on ? PeerFlag::SilentDrop : PeerFlag::Honest;
    json f{{"on", on}};
    record("silent", s.name, f);
    return TraceRecord{now_, current_seq_, "silent", s.name, f};
}

EventHandle Engine::schedule_command(const Command& cmd, SimTime at, std::string source) {
    return schedule(SimEvent{at, 0, kNoComponent, SimEvent::ControlCmd{cmd, std::move(source), processed_}});
}

std::string Engine::apply_command(const Command& cmd) {
    if (cmd.session_only()) return {};
    auto lookup = [&](const std::string& name) {
        const auto id = find(name);
        if (!id) throw UnknownComponent(name);
        return *id;
    };
    switch (cmd.type) {
        case Command::Type::Inject: {
            const ComponentId id = lookup(cmd.target);
            Slot& s = slots_[id.ordinal];
            auto* c = std::get_if<ClientState>(&s.state);
            if (!c) return "not_a_client";
            if (s.status != ComponentStatus::Alive) return "not_alive";
            SlotContext ctx(*this, id.ordinal);
            const std::string service = cmd.service.empty() ? c->cfg.service : cmd.service;
            apply_actions(id.ordinal, client_inject(*c, service, cmd.count, ctx));
            return {};
        }
        case Command::Type::Crash: {
            const ComponentId id = lookup(cmd.target);
            if (!alive(id)) return "not_alive";
            crash(id);
            return {};
        }
        case Command::Type::Restart: {
            const ComponentId id = lookup(cmd.target);
            if (status(id) != ComponentStatus::Crashed) return "not_crashed";
            restart(id);
            return {};
        }
        case Command::Type::SpawnWorker: {
            std::optional<ComponentId> leader;
            if (cmd.target.empty()) {
                for (std::uint32_t i = 0; i < slots_.size() && !leader; ++i)
                    if (std::holds_alternative<LeaderState>(slots_[i].state)) leader = id_of(i);
                if (!leader) return "no_leader";
            } else {
                leader = lookup(cmd.target);
            }
            auto* l = std::get_if<LeaderState>(&slots_[leader->ordinal].state);
            if (!l) return "not_a_leader";
            if (!alive(*leader)) return "not_alive";
            SlotContext ctx(*this, leader->ordinal);
            auto r = leader_spawn_worker(*l, ctx);
            if (!r.error.empty()) return r.error;
            apply_actions(leader->ordinal, std::move(r.actions));
            return {};
        }
        case Command::Type::StopWorker: {
            const ComponentId id = lookup(cmd.target);
            const auto* w = std::get_if<WorkerState>(&slots_[id.ordinal].state);
            if (!w) return "not_a_worker";
            const std::uint32_t lo = w->leader.ordinal;
            auto* l = std::get_if<LeaderState>(&slots_[lo].state);
            if (!l || slots_[lo].status != ComponentStatus::Alive) return "leader_unavailable";
            SlotContext ctx(*this, lo);
            auto r = leader_stop_worker(*l, id, ctx);
            if (!r.error.empty()) return r.error;
            apply_actions(lo, std::move(r.actions));
            return {};
        }
        case Command::Type::SetRate: {
            const ComponentId id = lookup(cmd.target);
            auto* c = std::get_if<ClientState>(&slots_[id.ordinal].state);
            if (!c) return "not_a_client";
            if (!alive(id)) return "not_alive";
            SlotContext ctx(*this, id.ordinal);
            apply_actions(id.ordinal, client_set_rate(*c, cmd.value, ctx));
            return {};
        }
        case Command::Type::ToggleSilentDrop: {
            const ComponentId id = lookup(cmd.target);
            const auto* p = std::get_if<PeerState>(&slots_[id.ordinal].state);
            if (!p) return "not_a_peer";
            set_silent_drop(id, p->flag != PeerFlag::SilentDrop);
            return {};
        }
        default: return {};
    }
}

// ---------------------------------------------------------------- trace

void Engine::record(std::string type, std::string comp, json fields) {
    trace_.emit(TraceRecord{now_, current_seq_, std::move(type), std::move(comp), std::move(fields)});
}

void Engine::record_at(SimTime t, std::string type, std::string comp, json fields) {
    trace_.emit(TraceRecord{t, next_seq_, std::move(type), std::move(comp), std::move(fields)});
}

}  // namespace archsim
