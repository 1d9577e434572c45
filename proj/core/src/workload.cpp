#include "archsim/workload.hpp"

namespace archsim {

namespace {

ComponentId resolve(const std::string& name, const Engine& engine) {
    const auto id = engine.find(name);
    if (!id) throw UnknownComponent(name);
    return *id;
}

}  // namespace

TraceRecord apply_fault(const FaultEvent& f, Engine& engine) {
    const ComponentId id = resolve(f.target, engine);
    switch (f.kind) {
        case FaultKind::Crash: return engine.crash(id);
        case FaultKind::Restart: return engine.restart(id);
        case FaultKind::SetSilentDrop: return engine.set_silent_drop(id, f.on);
    }
    throw Error("unknown fault kind");
}

EventHandle schedule_fault(const FaultEvent& f, Engine& engine) {
    const ComponentId id = resolve(f.target, engine);
    return engine.schedule(SimEvent{f.at, 0, id, SimEvent::Fault{f.kind, f.on}});
}

SimTime arrival_process(const ClientState& client, Pcg32& rng, SimTime now) {
    return now + client.cfg.gap.sample(rng);
}

}  // namespace archsim
