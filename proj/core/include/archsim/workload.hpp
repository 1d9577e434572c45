#pragma once

#include "archsim/behaviors.hpp"
#include "archsim/engine.hpp"
#include "archsim/rng.hpp"
#include "archsim/trace.hpp"
#include "archsim/types.hpp"

#include <string>

namespace archsim {

struct FaultEvent {
    SimTime at;
    std::string target;  // component name
    FaultKind kind = FaultKind::Crash;
    bool on = true;  // SetSilentDrop only

    friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

/// Applies a fault right now. Crash stops the component and cancels its
/// timers; deliveries already in flight are dropped on arrival. Restart brings
/// back a fresh state with the next generation. SetSilentDrop flips a peer.
TraceRecord apply_fault(const FaultEvent& f, Engine& engine);

/// Queues the fault as an ordinary kernel event at f.at.
EventHandle schedule_fault(const FaultEvent& f, Engine& engine);

/// Next submission instant for an open-loop client (think time for closed ones).
SimTime arrival_process(const ClientState& client, Pcg32& rng, SimTime now);

}  // namespace archsim
