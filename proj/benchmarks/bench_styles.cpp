#include <archsim/scenario.hpp>
#include <archsim/simulation.hpp>

#include <benchmark/benchmark.h>

#include <string>

using namespace archsim;

namespace {

void run_fixture(benchmark::State& state, const std::string& name) {
    const auto scenario = load_scenario_file(std::string(ARCHSIM_SCENARIO_DIR) + "/" + name + ".json");
    std::uint64_t events = 0;
    for (auto _ : state) {
        const auto out = run_scenario(scenario, {std::nullopt, 10'000'000});
        events += out.events;
        benchmark::DoNotOptimize(out.trace.size());
    }
    state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}

}  // namespace

BENCHMARK_CAPTURE(run_fixture, layered, std::string("layered_chain"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_fixture, pipeline, std::string("pipeline_4"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_fixture, client_server, std::string("client_server_spof"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_fixture, leader_follower, std::string("leader_elastic"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_fixture, p2p, std::string("p2p_no_spof"))->Unit(benchmark::kMillisecond);
