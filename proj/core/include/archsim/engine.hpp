#pragma once

#include "archsim/behaviors.hpp"
#include "archsim/command.hpp"
#include "archsim/distribution.hpp"
#include "archsim/message.hpp"
#include "archsim/rng.hpp"
#include "archsim/trace.hpp"
#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace archsim {

enum class FaultKind : std::uint8_t { Crash, Restart, SetSilentDrop };

const char* to_string(FaultKind kind);

struct SimEvent {
    struct Deliver {
        ComponentId from;
        Message msg;
    };
    struct Timer {
        std::uint64_t id = 0;
    };
    struct Fault {
        FaultKind kind = FaultKind::Crash;
        bool on = true;
    };
    struct ControlCmd {
        Command cmd;
        std::string source;
        std::uint64_t pos = 0;  // events processed when it was scheduled
    };

    SimTime time;
    std::uint64_t seq = 0;  // assigned by Engine::schedule
    ComponentId target;
    std::variant<Deliver, Timer, Fault, ControlCmd> payload;
};

struct EventHandle {
    SimTime time;
    std::uint64_t seq = 0;
};

enum class ComponentStatus : std::uint8_t { Alive, Crashed, Stopped };

const char* to_string(ComponentStatus status);

/// Deterministic discrete-event engine: virtual clock, (time, seq)-ordered
/// queue, per-component PCG32 streams, component registry and trace.
/// Single-threaded; one driver owns an engine at a time.
class Engine {
public:
    using Factory = std::function<BehaviorState()>;

    /// RNG stream not tied to any component.
    static constexpr std::uint32_t kWorkloadStream = 0xFFFFFFFFU;

    explicit Engine(std::uint64_t master_seed);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    // Registry.

    /// Registers a component and schedules its start at now(). `factory`
    /// rebuilds a fresh state on restart.
    ComponentId add_component(std::string name, std::string system, BehaviorState initial, Factory factory);
    /// Workers spawned by `leader` start from `tmpl` and are named prefix + counter.
    void set_worker_template(ComponentId leader, WorkerState tmpl, std::string name_prefix, std::uint32_t first_index);
    void set_link_latency(Distribution latency) { link_latency_ = latency; }

    std::optional<ComponentId> find(std::string_view name) const;
    /// Current id (with generation) of a slot.
    ComponentId current_id(std::uint32_t ordinal) const;
    const std::string& name_of(ComponentId id) const;
    const std::string& system_of(ComponentId id) const;
    Role role(ComponentId id) const;
    ComponentStatus status(ComponentId id) const;
    bool alive(ComponentId id) const { return status(id) == ComponentStatus::Alive; }
    const BehaviorState& state(ComponentId id) const;
    std::size_t component_count() const { return slots_.size(); }

    // Events.

    EventHandle schedule(SimEvent ev);
    bool cancel(EventHandle handle);
    /// Removes the least (time, seq) event, advances the clock and dispatches
    /// it. nullopt when the queue is exhausted.
    std::optional<SimEvent> step();
    /// Processes every event with time <= t and returns how many.
    std::uint64_t run_until(SimTime t);

    SimTime now() const { return now_; }
    std::uint64_t events_processed() const { return processed_; }
    std::uint64_t next_seq() const { return next_seq_; }
    std::optional<SimTime> next_event_time() const;
    std::size_t pending_events() const { return queue_.size(); }

    std::uint32_t rng_next(std::uint32_t stream);
    std::uint64_t master_seed() const { return master_seed_; }

    // Faults and commands. All of them throw UnknownComponent for unknown targets.

    TraceRecord crash(ComponentId target);
    /// Throws RestartOfLiveComponent unless the target is crashed.
    TraceRecord restart(ComponentId target);
    TraceRecord set_silent_drop(ComponentId target, bool on);

    /// Schedules a command at `at`; its trace line records the current event
    /// position so replay can re-inject it at the same point.
    EventHandle schedule_command(const Command& cmd, SimTime at, std::string source);
    /// Applies an engine-affecting command immediately. Returns an error text
    /// (empty on success). Session-only commands are accepted as no-ops.
    std::string apply_command(const Command& cmd);

    // Trace.

    TraceSink& trace() { return trace_; }
    /// Emits a record stamped with the current event's time and seq.
    void record(std::string type, std::string comp, nlohmann::json fields = nlohmann::json::object());
    /// Record stamped with `t` and the next unassigned seq (used for the end marker).
    void record_at(SimTime t, std::string type, std::string comp, nlohmann::json fields = nlohmann::json::object());

    /// Optional hook called after every processed event.
    void set_after_event(std::function<void(const SimEvent&)> hook) { after_event_ = std::move(hook); }

private:
    struct Slot {
        std::string name;
        std::string system;
        std::uint32_t generation = 0;
        ComponentStatus status = ComponentStatus::Alive;
        BehaviorState state;
        Factory factory;
        Pcg32 rng;
        std::map<std::uint64_t, EventHandle> timers;
        std::optional<WorkerState> worker_template;
        std::string worker_prefix;
        std::uint32_t next_worker_index = 0;
    };

    class SlotContext;
    friend class SlotContext;

    using QueueKey = std::pair<std::uint64_t, std::uint64_t>;  // (time, seq)

    Slot& slot(ComponentId id);
    const Slot& slot(ComponentId id) const;
    ComponentId id_of(std::uint32_t ordinal) const;
    void dispatch(const SimEvent& ev);
    void deliver(const SimEvent& ev, const SimEvent::Deliver& d);
    void fire_timer(const SimEvent& ev, const SimEvent::Timer& t);
    void run_control(const SimEvent& ev, const SimEvent::ControlCmd& c);
    void apply_actions(std::uint32_t ordinal, Actions actions);
    void cancel_timers(Slot& s);
    void schedule_start(std::uint32_t ordinal, Micros delay);
    ComponentId spawn_worker(ComponentId leader, ComponentId reserved);
    void stop_component(ComponentId target, const std::string& by);
    void rebuild_roster(std::uint32_t leader_ordinal);

    std::uint64_t master_seed_;
    SimTime now_{};
    std::uint64_t next_seq_ = 0;
    std::uint64_t current_seq_ = 0;
    std::uint64_t processed_ = 0;
    std::uint64_t next_request_id_ = 1;
    std::uint32_t reservations_ = 0;
    std::map<QueueKey, SimEvent> queue_;
    std::vector<Slot> slots_;
    std::unordered_map<std::string, std::uint32_t> by_name_;
    Pcg32 workload_rng_;
    Distribution link_latency_ = Distribution::constant(0);
    TraceSink trace_;
    std::function<void(const SimEvent&)> after_event_;
};

}  // namespace archsim
