#include <archsim/engine.hpp>
#include <archsim/rng.hpp>

#include <benchmark/benchmark.h>

using namespace archsim;

static void BM_ScheduleAndStep(benchmark::State& state) {
    const auto n = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) {
        Engine e(1);
        Pcg32 rng(7, 7);
        for (std::uint64_t i = 0; i < n; ++i)
            e.schedule(SimEvent{SimTime{rng.bounded(1'000'000)}, 0, ComponentId{0, 0}, SimEvent::Timer{i}});
        while (e.step()) {
        }
        benchmark::DoNotOptimize(e.now());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_ScheduleAndStep)->Arg(1'000)->Arg(100'000);

static void BM_Pcg32(benchmark::State& state) {
    Pcg32 rng(42, 54);
    for (auto _ : state) benchmark::DoNotOptimize(rng.next());
}
BENCHMARK(BM_Pcg32);

BENCHMARK_MAIN();
