#pragma once

#include "archsim/command.hpp"
#include "archsim/metrics.hpp"
#include "archsim/simulation.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace archsim {

class SessionRefused : public Error {
public:
    using Error::Error;
};

/// Interactive driver for one engine: paced virtual time, conductor commands
/// applied at tick boundaries, and outbound frames
/// (trace_batch, metrics_snapshot, topology_snapshot, ack, error).
/// Transport-free; the WebSocket server feeds it wall-clock ticks.
class Session {
public:
    /// Claims the simulation; throws SessionRefused if another session drives it.
    Session(std::shared_ptr<Simulation> sim, double pace);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    static std::unique_ptr<Session> open(const Scenario& scenario, double pace);

    /// The topology snapshot sent right after opening.
    nlohmann::json initial_frame() const { return topology_snapshot(); }

    /// Queues a command; it is applied at the next tick boundary.
    void submit(const Command& cmd);
    /// Applies queued commands, then advances virtual time by wall_seconds * pace
    /// when running. Returns the frames produced, in order.
    std::vector<nlohmann::json> tick(double wall_seconds);

    nlohmann::json topology_snapshot() const;
    /// Report over the last snapshot period ending at the current virtual time.
    nlohmann::json metrics_snapshot() const;

    SimTime virtual_now() const { return virtual_now_; }
    bool paused() const { return paused_; }
    double pace() const { return pace_; }
    bool at_horizon() const;

    /// Writes the end marker at the current virtual time.
    void close();
    const std::string& trace_text() const { return trace_; }
    Simulation& simulation() { return *sim_; }

private:
    void apply(const Command& cmd, std::vector<nlohmann::json>& out);
    void flush_trace(std::vector<nlohmann::json>& out);

    std::shared_ptr<Simulation> sim_;
    double pace_;
    bool paused_ = true;
    bool closed_ = false;
    SimTime virtual_now_{};
    double carry_micros_ = 0.0;
    SimTime last_snapshot_{};
    std::deque<Command> inbox_;
    std::vector<std::string> pending_lines_;
    std::string trace_;
    std::map<std::uint64_t, std::string> outcomes_;  // command id -> error text ("" when applied)
};

/// Outbound frame buffer with the backpressure rule: once over capacity the
/// oldest metrics snapshots are dropped; trace batches are never dropped.
class FrameQueue {
public:
    explicit FrameQueue(std::size_t capacity) : capacity_(capacity) {}
    void push(nlohmann::json frame);
    bool empty() const { return frames_.empty(); }
    std::size_t size() const { return frames_.size(); }
    nlohmann::json pop();
    std::uint64_t dropped() const { return dropped_; }

private:
    std::size_t capacity_;
    std::deque<nlohmann::json> frames_;
    std::uint64_t dropped_ = 0;
};

nlohmann::json ack_frame(std::uint64_t id, SimTime applied_at);
nlohmann::json error_frame(std::uint64_t id, const std::string& text);

}  // namespace archsim
