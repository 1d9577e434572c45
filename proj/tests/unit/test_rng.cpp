#include <archsim/engine.hpp>
#include <archsim/rng.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cstdint>

namespace {

// Straight transcription of pcg32_srandom_r / pcg32_random_r from pcg_basic.c,
// kept separate from the library so the two can disagree.
struct RefPcg {
    std::uint64_t state;
    std::uint64_t inc;
};

std::uint32_t ref_next(RefPcg* rng) {
    std::uint64_t oldstate = rng->state;
    rng->state = oldstate * 6364136223846793005ULL + rng->inc;
    std::uint32_t xorshifted = ((oldstate >> 18u) ^ oldstate) >> 27u;
    std::uint32_t rot = oldstate >> 59u;
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
}

RefPcg ref_seed(std::uint64_t initstate, std::uint64_t initseq) {
    RefPcg rng{0u, (initseq << 1u) | 1u};
    ref_next(&rng);
    rng.state += initstate;
    ref_next(&rng);
    return rng;
}

std::uint64_t ref_splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

TEST(Pcg32, MatchesPublishedDemoVector) {
    // First six outputs of pcg32-demo with seed (42, 54).
    const std::array<std::uint32_t, 6> expected{0xa15c02b7, 0x7b47f409, 0xba1d3330,
                                                0x83d2f293, 0xbfa4784b, 0xcbed606e};
    archsim::Pcg32 rng(42, 54);
    for (auto v : expected) EXPECT_EQ(rng.next(), v);
}

TEST(Pcg32, AgreesWithReferenceTranscriptionOverLongRun) {
    for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL, ~0ULL}) {
        archsim::Pcg32 lib(seed, seed * 3 + 7);
        RefPcg ref = ref_seed(seed, seed * 3 + 7);
        for (int i = 0; i < 10000; ++i) ASSERT_EQ(lib.next(), ref_next(&ref)) << "seed " << seed << " draw " << i;
    }
}

TEST(Splitmix64, KnownFirstOutput) {
    EXPECT_EQ(archsim::splitmix64(0), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(archsim::splitmix64(12345), ref_splitmix(12345));
}

TEST(Pcg32, BoundedStaysInRangeAndHitsEveryValue) {
    archsim::Pcg32 rng(7, 11);
    std::array<int, 5> hits{};
    for (int i = 0; i < 5000; ++i) {
        const auto v = rng.bounded(5);
        ASSERT_LT(v, 5u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Pcg32, UnitOpenClosedNeverZero) {
    archsim::Pcg32 rng(1, 2);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.unit_open_closed();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(EngineRng, SameSeedSameStreamSameValues) {
    archsim::Engine a(99);
    archsim::Engine b(99);
    for (int i = 0; i < 3; ++i) {
        a.add_component("c" + std::to_string(i), "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
        b.add_component("c" + std::to_string(i), "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    }
    for (std::uint32_t stream : {0u, 1u, 2u, archsim::Engine::kWorkloadStream})
        for (int i = 0; i < 100; ++i) ASSERT_EQ(a.rng_next(stream), b.rng_next(stream));
}

TEST(EngineRng, MasterSeedChangesStreamZero) {
    archsim::Engine zero(0);
    archsim::Engine one(1);
    zero.add_component("c", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    one.add_component("c", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });

    // Independent derivation: stream i of master m is PCG32 seeded with
    // splitmix(m ^ K*(i+1)) and splitmix of that base plus one.
    auto expected_first = [](std::uint64_t master) {
        const std::uint64_t base = master ^ (0xD1B54A32D192ED03ULL * 1);
        RefPcg r = ref_seed(ref_splitmix(base), ref_splitmix(base + 1));
        return ref_next(&r);
    };
    const auto z = zero.rng_next(0);
    const auto o = one.rng_next(0);
    EXPECT_EQ(z, expected_first(0));
    EXPECT_EQ(o, expected_first(1));
    EXPECT_NE(z, o);
}

TEST(EngineRng, DrawsOnOneStreamDoNotPerturbAnother) {
    archsim::Engine a(5);
    archsim::Engine b(5);
    for (auto* e : {&a, &b}) {
        e->add_component("x", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
        e->add_component("y", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    }
    for (int i = 0; i < 1000; ++i) a.rng_next(0);
    for (int i = 0; i < 50; ++i) ASSERT_EQ(a.rng_next(1), b.rng_next(1));
}

TEST(EngineRng, UnknownStreamThrows) {
    archsim::Engine e(1);
    EXPECT_THROW(e.rng_next(3), archsim::UnknownStream);
}

TEST(EngineRng, AddingAComponentDoesNotShiftExistingStreams) {
    archsim::Engine small(8);
    archsim::Engine big(8);
    small.add_component("a", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    big.add_component("a", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    big.add_component("b", "s", archsim::SinkState{}, [] { return archsim::SinkState{}; });
    for (int i = 0; i < 20; ++i) ASSERT_EQ(small.rng_next(0), big.rng_next(0));
}
