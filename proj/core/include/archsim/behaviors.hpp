#pragma once

// Role cards as deterministic state machines. Every handler is a function of
// (state, input, context) that mutates the state and returns actions for the
// kernel to interpret; nothing else is touched.

#include "archsim/distribution.hpp"
#include "archsim/message.hpp"
#include "archsim/rng.hpp"
#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace archsim {

namespace act {
struct Send {
    ComponentId to;
    Message msg;
    Micros delay = 0;  // on top of link latency
};
struct SetTimer {
    std::uint64_t timer = 0;  // re-arming an existing id replaces it
    Micros delay = 0;
};
struct CancelTimer {
    std::uint64_t timer = 0;
};
/// Create a worker in the slot previously reserved through Context::reserve_component.
struct Spawn {
    ComponentId worker;
};
struct Stop {
    ComponentId worker;
};
/// Peer overlay edit. The kernel mirrors it on the other endpoint.
struct Link {
    ComponentId peer;
    bool add = true;
};
/// Trace record emitted on behalf of the component.
struct Note {
    std::string type;
    nlohmann::json fields = nlohmann::json::object();
};
}  // namespace act

using Action = std::variant<act::Send, act::SetTimer, act::CancelTimer, act::Spawn, act::Stop, act::Link, act::Note>;
using Actions = std::vector<Action>;

/// What a behavior may ask of the kernel while handling one input.
class Context {
public:
    virtual ~Context() = default;
    virtual SimTime now() const = 0;
    virtual ComponentId self() const = 0;
    virtual Pcg32& rng() = 0;
    virtual std::uint64_t new_request_id() = 0;
    /// Slot the next Spawn action will occupy.
    virtual ComponentId reserve_component() = 0;
    virtual bool is_alive(ComponentId id) const = 0;
    virtual std::optional<Role> role_of(ComponentId id) const = 0;
    /// Live peers of the caller's system, ordered by ordinal, caller included.
    virtual std::vector<ComponentId> live_peers() const = 0;
    virtual std::string name_of(ComponentId id) const = 0;
};

namespace timer {
enum class Kind : std::uint8_t {
    Start = 1,
    ProcIn,
    ProcOut,
    ProcDone,
    Arrival,
    Timeout,
    Grace,
    IdleCheck,
    Maintenance,
    DispatchTimeout,
    DownstreamTimeout,
};
constexpr std::uint64_t make(Kind kind, std::uint64_t token = 0) {
    return (static_cast<std::uint64_t>(kind) << 56U) | (token & 0x00FFFFFFFFFFFFFFULL);
}
constexpr Kind kind_of(std::uint64_t id) { return static_cast<Kind>(id >> 56U); }
constexpr std::uint64_t token_of(std::uint64_t id) { return id & 0x00FFFFFFFFFFFFFFULL; }
}  // namespace timer

enum class Mode : std::uint8_t { Idle, Processing, ProcessingIn, AwaitingReply, ProcessingOut };

const char* to_string(Mode mode);

/// A message waiting in (or taken from) a mailbox, with its immediate sender.
struct Inbound {
    Message msg;
    ComponentId from;
};

struct LayerState {
    std::optional<ComponentId> prev;  // nullopt: input layer, takes requests from clients
    std::optional<ComponentId> next;  // nullopt: last layer
    Distribution proc_in;
    Distribution proc_out;
    Micros downstream_timeout = 0;  // 0: wait forever
    Mode mode = Mode::Idle;
    std::deque<Inbound> deferred;
    std::optional<Inbound> current;
    std::optional<Message> outgoing;  // reply being prepared during ProcessingOut
};

struct FilterState {
    std::vector<ComponentId> next;         // next stage replicas, or the sink
    std::vector<ComponentId> accept_from;  // empty: input filter
    bool last = false;
    std::size_t cursor = 0;
    Distribution proc;
    Mode mode = Mode::Idle;
    std::deque<Inbound> deferred;
    std::optional<Inbound> current;
};

/// The pipeline's output point. Hands each finished request to its client.
struct SinkState {
    std::uint64_t outputs = 0;
};

struct DirectoryState {
    std::map<std::string, std::vector<ComponentId>> catalogue;
    std::map<std::string, std::size_t> route_cursor;
    Distribution route_delay;
};

struct ServiceState {
    std::string service_name;
    Distribution proc;
    Mode mode = Mode::Idle;
    std::deque<Inbound> deferred;
    std::optional<Inbound> current;
};

enum class DispatchPolicy : std::uint8_t { Random, RoundRobin, LeastBusy };

struct Fanout {
    enum class Mode : std::uint8_t { Single, Replicate, Split };
    Mode mode = Mode::Single;
    std::uint32_t k = 1;

    friend bool operator==(const Fanout&, const Fanout&) = default;
};

struct LeaderConfig {
    DispatchPolicy policy = DispatchPolicy::RoundRobin;
    Fanout fanout;
    std::uint32_t min_workers = 1;
    std::uint32_t max_workers = 1;
    Micros idle_check_period = 0;  // 0: never stop idle workers
    Micros idle_stop_threshold = 0;
    Micros spawn_delay = 0;
    Micros dispatch_timeout = 0;  // 0: never declare a worker lost

    friend bool operator==(const LeaderConfig&, const LeaderConfig&) = default;
};

struct LeaderState {
    struct WorkerView {
        ComponentId id;
        std::uint32_t outstanding = 0;
        SimTime idle_since;
        SimTime ready_at;  // spawn startup delay
    };
    struct Dispatch {
        std::uint64_t request_id = 0;
        ComponentId worker;
        std::optional<Fragment> fragment;
    };
    struct Gather {
        Message original;
        std::uint32_t needed = 1;
        std::set<std::uint32_t> got;
        bool replied = false;
    };

    LeaderConfig cfg;
    std::vector<WorkerView> workers;
    std::size_t cursor = 0;
    std::map<std::uint64_t, Gather> pending_gather;
    std::set<std::uint64_t> completed;
    std::map<std::uint64_t, Dispatch> dispatches;  // by dispatch token
    std::uint64_t next_token = 0;
    std::deque<Message> backlog;
};

struct WorkerState {
    ComponentId leader;
    Distribution proc;
    Mode mode = Mode::Idle;
    std::deque<Inbound> deferred;
    std::optional<Inbound> current;
    SimTime idle_since;
};

enum class PeerFlag : std::uint8_t { Honest, SilentDrop };

struct PeerState {
    std::set<ComponentId> neighbours;  // generation-normalized slots
    std::set<std::string> can_handle;
    Distribution proc;
    std::uint32_t forward_fanout = 1;
    std::set<std::uint64_t> seen;
    Micros maintenance_period = 0;  // 0: never revisit
    std::uint64_t churn_threshold = 0;  // probability scaled to 2^32
    std::uint32_t target_degree = 0;
    PeerFlag flag = PeerFlag::Honest;
    Mode mode = Mode::Idle;
    std::deque<Inbound> deferred;
    std::optional<Inbound> current;
};

enum class LoopMode : std::uint8_t { Open, Closed };

struct ClientConfig {
    LoopMode loop = LoopMode::Open;
    Distribution gap;  // interarrival (open) or think time (closed)
    std::string service;
    Micros timeout = 0;  // 0: wait forever
    std::uint32_t max_attempts = 1;
    std::optional<std::uint32_t> ttl_hops;
    bool return_path = false;  // push self onto hop_path (P2P)
    Micros start = 0;
    Micros failure_grace = 0;

    friend bool operator==(const ClientConfig&, const ClientConfig&) = default;
};

struct ClientState {
    struct Outstanding {
        SimTime submitted_at;
        std::uint32_t attempts = 1;
        ComponentId entry;
        std::string service;
        std::optional<Message> held_failure;
    };

    ClientConfig cfg;
    std::vector<ComponentId> entry_points;
    std::size_t entry_cursor = 0;
    std::set<std::uint32_t> suspect;  // entry ordinals
    std::map<std::uint64_t, Outstanding> outstanding;
    bool arrivals_on = true;
};

using BehaviorState = std::variant<LayerState, FilterState, SinkState, DirectoryState, ServiceState, LeaderState,
                                   WorkerState, PeerState, ClientState>;

Role role_of(const BehaviorState& state);

/// Display state for snapshots: idle, processing, blocked.
std::string activity(const BehaviorState& state);
std::size_t queue_length(const BehaviorState& state);

// Per-role handlers.

Actions layer_on_message(LayerState& s, const Message& msg, ComponentId from, Context& ctx);
Actions layer_on_timer(LayerState& s, std::uint64_t timer, Context& ctx);

Actions filter_on_message(FilterState& s, const Message& msg, ComponentId from, Context& ctx);
Actions filter_on_timer(FilterState& s, std::uint64_t timer, Context& ctx);

Actions sink_on_message(SinkState& s, const Message& msg, ComponentId from, Context& ctx);

Actions directory_on_message(DirectoryState& s, const Message& msg, ComponentId from, Context& ctx);

Actions service_on_message(ServiceState& s, const Message& msg, ComponentId from, Context& ctx);
Actions service_on_timer(ServiceState& s, std::uint64_t timer, Context& ctx);

Actions leader_on_start(LeaderState& s, Context& ctx);
Actions leader_on_message(LeaderState& s, const Message& msg, ComponentId from, Context& ctx);
Actions leader_on_timer(LeaderState& s, std::uint64_t timer, Context& ctx);

Actions worker_on_message(WorkerState& s, const Message& msg, ComponentId from, Context& ctx);
Actions worker_on_timer(WorkerState& s, std::uint64_t timer, Context& ctx);

Actions peer_on_start(PeerState& s, Context& ctx);
Actions peer_on_message(PeerState& s, const Message& msg, ComponentId from, Context& ctx);
Actions peer_on_timer(PeerState& s, std::uint64_t timer, Context& ctx);

Actions client_on_start(ClientState& s, Context& ctx);
/// Arrival, timeout and grace timers as well as replies all land here.
Actions client_tick(ClientState& s, std::uint64_t timer, Context& ctx);
Actions client_on_message(ClientState& s, const Message& msg, ComponentId from, Context& ctx);

// Conductor hooks.

Actions client_inject(ClientState& s, const std::string& service, std::uint32_t count, Context& ctx);
Actions client_set_rate(ClientState& s, double rps, Context& ctx);

struct ControlOutcome {
    Actions actions;
    std::string error;  // empty on success
};
ControlOutcome leader_spawn_worker(LeaderState& s, Context& ctx);
ControlOutcome leader_stop_worker(LeaderState& s, ComponentId worker, Context& ctx);

// Generic dispatch used by the kernel.

Actions on_start(BehaviorState& state, Context& ctx);
Actions on_message(BehaviorState& state, const Message& msg, ComponentId from, Context& ctx);
Actions on_timer(BehaviorState& state, std::uint64_t timer, Context& ctx);

/// Converts a probability in [0,1] to the integer threshold compared against one PCG32 draw.
std::uint64_t probability_threshold(double p);

}  // namespace archsim
