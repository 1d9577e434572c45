#include "archsim/session.hpp"

#include <cmath>

namespace archsim {

using nlohmann::json;

json ack_frame(std::uint64_t id, SimTime applied_at) {
    return {{"type", "ack"}, {"id", id}, {"t", applied_at.micros}};
}

json error_frame(std::uint64_t id, const std::string& text) { return {{"type", "error"}, {"id", id}, {"text", text}}; }

Session::Session(std::shared_ptr<Simulation> sim, double pace) : sim_(std::move(sim)), pace_(pace) {
    if (!sim_) throw Error("session without a simulation");
    if (!sim_->claim_driver()) throw SessionRefused("simulation already has a driver");
    if (sim_->started()) {
        sim_->release_driver();
        throw SessionRefused("simulation already started");
    }
    sim_->engine().trace().add_line_sink([this](const std::string& line) {
        pending_lines_.push_back(line);
        trace_ += line;
        trace_ += '\n';
    });
    sim_->engine().trace().add_observer([this](const TraceRecord& r) {
        if (r.type != "control" || !r.fields.contains("source") || r.fields["source"] != "conductor") return;
        const auto& cmd = r.fields["cmd"];
        const auto id = cmd.value("id", std::uint64_t{0});
        outcomes_[id] = r.fields.contains("error") ? r.fields["error"].get<std::string>() : std::string();
    });
    sim_->start();
}

Session::~Session() { sim_->release_driver(); }

std::unique_ptr<Session> Session::open(const Scenario& scenario, double pace) {
    return std::make_unique<Session>(std::make_shared<Simulation>(scenario), pace);
}

void Session::submit(const Command& cmd) { inbox_.push_back(cmd); }

bool Session::at_horizon() const { return virtual_now_.micros >= sim_->scenario().duration; }

void Session::apply(const Command& cmd, std::vector<json>& out) {
    if (closed_) {
        out.push_back(error_frame(cmd.id, "session closed"));
        return;
    }
    // Every command, session-only ones included, goes through the trace so replay sees it.
    outcomes_.erase(cmd.id);
    sim_->inject(cmd, virtual_now_);
    sim_->run_to(virtual_now_);
    const auto it = outcomes_.find(cmd.id);
    const std::string error = it == outcomes_.end() ? std::string("not applied") : it->second;
    if (!error.empty()) {
        out.push_back(error_frame(cmd.id, error));
        return;
    }
    switch (cmd.type) {
        case Command::Type::Pause: paused_ = true; break;
        case Command::Type::Resume: paused_ = false; break;
        case Command::Type::SetPace: pace_ = cmd.value; break;
        case Command::Type::Step: {
            const SimTime horizon{sim_->scenario().duration};
            for (std::uint64_t i = 0; i < cmd.steps; ++i) {
                const auto next = sim_->engine().next_event_time();
                if (!next || *next > horizon) break;
                sim_->engine().step();
            }
            virtual_now_ = std::max(virtual_now_, sim_->engine().now());
            break;
        }
        default: break;
    }
    out.push_back(ack_frame(cmd.id, virtual_now_));
}

void Session::flush_trace(std::vector<json>& out) {
    if (pending_lines_.empty()) return;
    out.push_back({{"type", "trace_batch"}, {"lines", pending_lines_}});
    pending_lines_.clear();
}

std::vector<json> Session::tick(double wall_seconds) {
    std::vector<json> out;
    if (closed_) {
        flush_trace(out);
        return out;
    }
    while (!inbox_.empty()) {
        Command cmd = std::move(inbox_.front());
        inbox_.pop_front();
        apply(cmd, out);
    }
    if (!paused_ && wall_seconds > 0.0) {
        const double advance = wall_seconds * pace_ * 1e6 + carry_micros_;
        const double whole = std::floor(advance);
        carry_micros_ = advance - whole;
        const Micros horizon = sim_->scenario().duration;
        const Micros target = std::min<Micros>(horizon, virtual_now_.micros + static_cast<Micros>(whole));
        sim_->run_to(SimTime{target});
        virtual_now_ = SimTime{target};
    }
    flush_trace(out);
    if (virtual_now_ - last_snapshot_ >= sim_->scenario().snapshot_period) {
        out.push_back(metrics_snapshot());
        out.push_back(topology_snapshot());
        last_snapshot_ = virtual_now_;
    }
    if (at_horizon()) {
        close();
        flush_trace(out);
    }
    return out;
}

json Session::topology_snapshot() const {
    const Engine& e = sim_->engine();
    json nodes = json::array();
    json edges = json::array();
    auto name = [&](ComponentId id) { return e.name_of(e.current_id(id.ordinal)); };
    auto edge = [&](std::uint32_t from, ComponentId to) {
        if (to.valid() && to.ordinal < e.component_count() &&
            e.status(e.current_id(to.ordinal)) != ComponentStatus::Stopped)
            edges.push_back({e.name_of(e.current_id(from)), name(to)});
    };
    for (std::uint32_t i = 0; i < e.component_count(); ++i) {
        const ComponentId id = e.current_id(i);
        const auto status = e.status(id);
        if (status == ComponentStatus::Stopped) continue;
        const BehaviorState& st = e.state(id);
        std::string state = activity(st);
        if (status == ComponentStatus::Crashed) state = "down";
        if (const auto* p = std::get_if<PeerState>(&st); p && p->flag == PeerFlag::SilentDrop && state != "down")
            state = "silent_drop";
        nodes.push_back({{"name", e.name_of(id)},
                         {"role", to_string(e.role(id))},
                         {"system", e.system_of(id)},
                         {"generation", id.generation},
                         {"state", state},
                         {"queue", queue_length(st)}});
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, LayerState>) {
                    if (s.next) edge(i, *s.next);
                } else if constexpr (std::is_same_v<S, FilterState>) {
                    for (auto n : s.next) edge(i, n);
                } else if constexpr (std::is_same_v<S, DirectoryState>) {
                    std::set<ComponentId> seen;
                    for (const auto& [_, insts] : s.catalogue)
                        for (auto n : insts)
                            if (seen.insert(n).second) edge(i, n);
                } else if constexpr (std::is_same_v<S, LeaderState>) {
                    for (const auto& w : s.workers) edge(i, w.id);
                } else if constexpr (std::is_same_v<S, PeerState>) {
                    for (auto n : s.neighbours) edge(i, n);
                } else if constexpr (std::is_same_v<S, ClientState>) {
                    for (auto n : s.entry_points) edge(i, n);
                }
            },
            st);
    }
    return {{"type", "topology_snapshot"},
            {"t", virtual_now_.micros},
            {"style", to_string(sim_->scenario().style)},
            {"paused", paused_},
            {"nodes", nodes},
            {"edges", edges}};
}

json Session::metrics_snapshot() const {
    const Micros period = sim_->scenario().snapshot_period;
    const Window w{SimTime{virtual_now_.micros - std::min(period, virtual_now_.micros)}, virtual_now_};
    json frame{{"type", "metrics_snapshot"},
               {"t", virtual_now_.micros},
               {"window", {{"from_us", w.from.micros}, {"to_us", w.to.micros}}}};
    frame["report"] = w.length() == 0 ? json(nullptr) : to_json(make_report(sim_->ledger(), w));
    return frame;
}

void Session::close() {
    if (closed_) return;
    sim_->finish(virtual_now_);
    closed_ = true;
}

void FrameQueue::push(json frame) {
    frames_.push_back(std::move(frame));
    while (frames_.size() > capacity_) {
        auto victim = frames_.end();
        for (auto it = frames_.begin(); it != frames_.end(); ++it) {
            if ((*it)["type"] == "metrics_snapshot") {
                victim = it;
                break;
            }
        }
        if (victim == frames_.end()) break;
        frames_.erase(victim);
        ++dropped_;
    }
}

json FrameQueue::pop() {
    json f = std::move(frames_.front());
    frames_.pop_front();
    return f;
}

}  // namespace archsim
