// Writes every frame kind a session produces, plus each fixture's effective
// scenario, so an external validator can check them against the schemas.
//   archsim_frame_dump <work-dir>
#include "test_support.hpp"

#include <archsim/session.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace archsim;
using namespace archsim::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Command make(Command::Type type, std::uint64_t id, std::string target = "") {
    Command c;
    c.type = type;
    c.id = id;
    c.target = std::move(target);
    return c;
}

// One command of each kind, aimed at a component the fixture has when possible.
std::vector<Command> commands_for(const Scenario& s, const Simulation& sim) {
    const Engine& e = sim.engine();
    std::string client;
    std::string some_component;
    std::string leader;
    std::string peer;
    for (std::uint32_t i = 0; i < e.component_count(); ++i) {
        const auto id = e.current_id(i);
        const Role r = e.role(id);
        if (r == Role::Client && client.empty()) client = e.name_of(id);
        if (r != Role::Client && r != Role::Sink && some_component.empty()) some_component = e.name_of(id);
        if (r == Role::Leader && leader.empty()) leader = e.name_of(id);
        if (r == Role::Peer && peer.empty()) peer = e.name_of(id);
    }
    std::vector<Command> out;
    std::uint64_t id = 1;
    out.push_back(make(Command::Type::Step, id++));
    out.back().steps = 5;
    Command pace = make(Command::Type::SetPace, id++);
    pace.value = 2.0;
    out.push_back(pace);
    Command inject = make(Command::Type::Inject, id++, client);
    inject.service = s.workload.empty() ? "default" : s.workload.front().cfg.service;
    inject.count = 2;
    out.push_back(inject);
    Command rate = make(Command::Type::SetRate, id++, client);
    rate.value = 20.0;
    out.push_back(rate);
    if (!leader.empty()) out.push_back(make(Command::Type::SpawnWorker, id++, leader));
    if (!peer.empty()) out.push_back(make(Command::Type::ToggleSilentDrop, id++, peer));
    out.push_back(make(Command::Type::Crash, id++, some_component));
    out.push_back(make(Command::Type::Restart, id++, some_component));
    out.push_back(make(Command::Type::StopWorker, id++, "no.such.worker"));  // error frame
    out.push_back(make(Command::Type::Resume, id++));
    return out;
}

void write(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: archsim_frame_dump <work-dir>\n";
        return 1;
    }
    const fs::path work = argv[1];
    fs::create_directories(work / "frames");
    fs::create_directories(work / "effective");
    json client_frames = json::array();
    for (const auto& name : fixture_names()) {
        const Scenario s = fixture(name);
        write(work / "effective" / (name + ".json"), json::parse(emit_effective(s)));

        auto session = Session::open(s, 1.0);
        json frames = json::array();
        frames.push_back(session->initial_frame());
        for (const auto& c : commands_for(s, session->simulation())) {
            client_frames.push_back(c.to_json());
            session->submit(c);
        }
        session->submit(make(Command::Type::Pause, 999));
        client_frames.push_back(make(Command::Type::Pause, 999).to_json());
        for (auto& f : session->tick(0.0)) frames.push_back(std::move(f));
        session->submit(make(Command::Type::Resume, 1000));
        for (int i = 0; i < 3; ++i)
            for (auto& f : session->tick(0.5)) frames.push_back(std::move(f));
        frames.push_back(error_frame(0, "simulation already has a driver"));
        write(work / "frames" / (name + ".json"), frames);
    }
    write(work / "client_frames.json", client_frames);
    std::cout << "wrote frames for " << fixture_names().size() << " fixtures to " << work.string() << "\n";
    return 0;
}
