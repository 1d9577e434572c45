#pragma once

#include "archsim/engine.hpp"
#include "archsim/metrics.hpp"
#include "archsim/scenario.hpp"
#include "archsim/topology.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace archsim {

inline constexpr const char* kTraceFormat = "archsim-trace/1";

/// A scenario wired into an engine: topologies built, components registered,
/// faults and scheduled commands queued, and a live ledger listening to the trace.
class Simulation {
public:
    struct Overrides {
        std::optional<std::uint64_t> seed;
        std::optional<Micros> duration;
    };

    explicit Simulation(Scenario scenario, Overrides overrides = {});

    Engine& engine() { return engine_; }
    const Engine& engine() const { return engine_; }
    /// The effective scenario (overrides applied). This is what the trace header embeds.
    const Scenario& scenario() const { return scenario_; }
    const std::vector<Topology>& topologies() const { return topologies_; }
    const Ledger& ledger() const { return ledger_; }

    /// Emits the header and queues faults and scheduled commands. Attach trace sinks first.
    void start();
    bool started() const { return started_; }

    /// Queues a conductor command at `at` (>= now).
    void inject(const Command& cmd, SimTime at);

    /// Processes events up to `t`.
    std::uint64_t run_to(SimTime t) { return engine_.run_until(t); }
    /// Runs to `horizon`, writes the end marker and closes the ledger.
    void finish(SimTime horizon);
    bool finished() const { return finished_; }

    /// One driver at a time: a second claim fails until release.
    bool claim_driver() { return !driver_.exchange(true); }
    void release_driver() { driver_.store(false); }

    /// Ordinal offset of each system inside the engine.
    std::uint32_t offset_of(std::size_t system_index) const { return offsets_.at(system_index); }

private:
    void build();

    Scenario scenario_;
    Engine engine_;
    std::vector<Topology> topologies_;
    std::vector<std::uint32_t> offsets_;
    Ledger ledger_;
    bool started_ = false;
    bool finished_ = false;
    std::atomic<bool> driver_{false};
};

struct RunOutput {
    std::string trace;
    Ledger ledger;
    std::string effective_scenario;
    std::uint64_t events = 0;
};

/// Batch run to the scenario's duration, keeping the trace in memory.
RunOutput run_scenario(const Scenario& scenario, Simulation::Overrides overrides = {});

class ReplayDivergence : public Error {
public:
    explicit ReplayDivergence(std::size_t line)
        : Error("replay diverged at line " + std::to_string(line)), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Re-executes a trace from its header and conductor commands. Returns the
/// regenerated bytes; throws ReplayDivergence (1-based line) on any difference,
/// including a header that no longer parses, and MalformedTrace on empty input.
std::string replay_trace(std::string_view trace_text);

}  // namespace archsim
