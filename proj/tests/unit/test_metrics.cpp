#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace archsim;
using namespace archsim::testing;
using nlohmann::json;

namespace {

TraceRecord rec(Micros t, std::string type, std::string comp, json fields = json::object()) {
    return TraceRecord{SimTime{t}, 0, std::move(type), std::move(comp), std::move(fields)};
}

TraceRecord submit(Micros t, std::uint64_t rid, const std::string& client = "c") {
    return rec(t, "submit", client, {{"rid", rid}, {"entry", "x"}, {"attempt", 1}});
}

TraceRecord resolve(Micros t, std::uint64_t rid, const char* outcome, const std::string& client = "c") {
    json f{{"rid", rid}, {"outcome", outcome}, {"hops", 2}, {"attempts", 1}};
    if (std::string(outcome) == "failure") f["reason"] = "no_route";
    return rec(t, "resolve", client, f);
}

TraceRecord end_marker(Micros t) { return rec(t, "end", "kernel", {{"events", 1}}); }

}  // namespace

TEST(Ledger, SingleRequestServedIn30ms) {
    const auto l = record({submit(0, 1), resolve(30'000, 1, "success"), end_marker(100'000)});
    ASSERT_EQ(l.requests().size(), 1u);
    const auto& r = l.requests().at(1);
    EXPECT_EQ(r.outcome, Outcome::Success);
    EXPECT_EQ(r.resolved_at - r.submitted_at, 30'000u);
    EXPECT_EQ(r.hops, 2u);
    EXPECT_FALSE(r.censored);
}

TEST(Ledger, RequestAliveAtEndIsCensoredTimeoutAtHorizon) {
    const auto l = record({submit(10, 1), end_marker(500)});
    const auto& r = l.requests().at(1);
    EXPECT_TRUE(r.censored);
    EXPECT_FALSE(r.resolved);
    EXPECT_EQ(r.outcome, Outcome::Timeout);
    EXPECT_EQ(r.resolved_at.micros, 500u);
    const auto rep = make_report(l, Window{kTimeZero, SimTime{500}});
    EXPECT_EQ(rep.censored, 1u);
    EXPECT_EQ(rep.timeout, 0u);
    EXPECT_FALSE(rep.availability);
}

TEST(Ledger, ReplicatedDuplicateRepliesLeaveOneRecord) {
    auto j = fixture_json("leader_fanout");
    j["duration_us"] = 5'000'000;
    const auto out = run_scenario(scenario_from_json(j));
    EXPECT_GT(out.ledger.dup_discards(), 0u);
    std::size_t resolves = 0;
    for (const auto& r : records_of(out.trace)) resolves += r.type == "resolve";
    std::size_t resolved = 0;
    for (const auto& [_, r] : out.ledger.requests()) resolved += r.resolved;
    EXPECT_EQ(resolves, resolved);
    EXPECT_TRUE(check_invariants(out.ledger).empty());
}

TEST(Ledger, DoubleResolutionAndOverlapAreViolations) {
    const auto l = record({submit(0, 1), resolve(5, 1, "success"), resolve(6, 1, "failure"),
                           rec(7, "begin", "w", {{"rid", 1}}), rec(8, "begin", "w", {{"rid", 2}}), end_marker(9)});
    const auto v = check_invariants(l);
    EXPECT_GE(v.size(), 2u);
}

TEST(Ledger, MalformedTraceThrows) {
    EXPECT_THROW(record_text("{\"t\":1}\n"), MalformedTrace);
    EXPECT_THROW(record({submit(0, 1), rec(3, "resolve", "c", {{"rid", 1}, {"outcome", "maybe"}})}), MalformedTrace);
    EXPECT_THROW(record({rec(0, "submit", "c", json::object())}), MalformedTrace);
}

TEST(Throughput, CountsSuccessesPerSecondInWindow) {
    std::vector<TraceRecord> rs;
    for (std::uint64_t i = 0; i < 10; ++i) {
        rs.push_back(submit(i * 100'000, i + 1));
        rs.push_back(resolve(i * 100'000 + 50'000, i + 1, i % 2 ? "success" : "failure"));
    }
    rs.push_back(end_marker(1'000'000));
    const auto l = record(rs);
    EXPECT_DOUBLE_EQ(throughput(l, Window{kTimeZero, SimTime{1'000'000}}), 5.0);
    EXPECT_DOUBLE_EQ(throughput(l, Window{SimTime{500'000}, SimTime{1'000'000}}), 3.0 / 0.5);
}

TEST(Throughput, ZeroCompletionsIsZeroAndEmptyWindowThrows) {
    const auto l = record({submit(0, 1), end_marker(10)});
    EXPECT_EQ(throughput(l, Window{kTimeZero, SimTime{10}}), 0.0);
    EXPECT_THROW(throughput(l, Window{SimTime{10}, SimTime{10}}), EmptyWindow);
}

TEST(Throughput, ThreeLayerChainClosedForm) {
    const auto s = scenario_from_json(layered_chain_json(3, 10'000, 20'000'000));
    const auto out = run_scenario(s);
    EXPECT_NEAR(throughput(out.ledger, Window{SimTime{s.warmup}, SimTime{s.duration}}), 100.0 / 3.0, 100.0 / 3.0 * 0.02);
}

TEST(Throughput, FourFilterPipelineClosedForm) {
    const auto s = scenario_from_json(pipeline_json(4, 10'000, 20'000'000));
    const auto out = run_scenario(s);
    EXPECT_NEAR(throughput(out.ledger, Window{SimTime{s.warmup}, SimTime{s.duration}}), 100.0, 2.0);
}

TEST(Availability, NoFaultsIsOne) {
    const auto s = fixture("leader_fanout");
    const auto out = run_scenario(s, {std::nullopt, 5'000'000});
    EXPECT_DOUBLE_EQ(availability(out.ledger, Window{kTimeZero, SimTime{4'000'000}}), 1.0);
}

TEST(Availability, SoleDirectoryDownForWholeWindowIsZero) {
    const auto out = run_scenario(fixture("client_server_spof"));
    // Submissions whose timeout still falls inside the outage.
    EXPECT_DOUBLE_EQ(availability(out.ledger, Window{SimTime{20'000'000}, SimTime{39'000'000}}), 0.0);
}

TEST(Availability, OneOfTwoServiceInstancesDownIsStillOne) {
    // A closed-loop client is the only traffic through the directory, so each
    // retry lands on the other instance.
    auto j = fixture_json("client_server_spof");
    j["duration_us"] = 20'000'000;
    j["workload"][0]["count"] = 1;
    j["workload"][0]["loop"] = "closed";
    j["workload"][0]["gap"] = constant(10'000);
    j["workload"][0]["max_attempts"] = 2;
    j["faults"] = {{{"at_us", 5'000'000}, {"target", "cs.default.1"}, {"kind", "crash"}}};
    const auto out = run_scenario(scenario_from_json(j));
    const auto rep = make_report(out.ledger, Window{SimTime{1'000'000}, SimTime{18'000'000}});
    ASSERT_TRUE(rep.availability);
    EXPECT_DOUBLE_EQ(*rep.availability, 1.0);
    EXPECT_EQ(rep.timeout, 0u);
    // Slower: retried requests pay one timeout.
    EXPECT_GE(rep.latency_max, 1'000'000u);
}

TEST(Availability, EmptyWindowThrows) {
    const auto l = record({end_marker(10)});
    EXPECT_THROW(availability(l, Window{kTimeZero, SimTime{10}}), EmptyWindow);
}

TEST(Utilization, IdleComponentIsZeroAndClipsAtEdges) {
    const auto l = record({rec(0, "recv", "idle"), rec(100, "begin", "busy", {{"rid", 1}}),
                           rec(300, "end", "busy", {{"rid", 1}}), end_marker(1000)});
    EXPECT_EQ(utilization(l, "idle", Window{kTimeZero, SimTime{1000}}), 0.0);
    EXPECT_DOUBLE_EQ(utilization(l, "busy", Window{kTimeZero, SimTime{1000}}), 0.2);
    EXPECT_DOUBLE_EQ(utilization(l, "busy", Window{SimTime{200}, SimTime{400}}), 0.5);
    EXPECT_THROW(utilization(l, "ghost", Window{kTimeZero, SimTime{1000}}), UnknownComponent);
}

TEST(Utilization, LayerPhasesCountAsBusy) {
    const auto l = record({rec(0, "begin", "l", {{"rid", 1}, {"phase", "in"}}),
                           rec(10, "end", "l", {{"rid", 1}, {"phase", "in"}}),
                           rec(30, "begin", "l", {{"rid", 1}, {"phase", "out"}}),
                           rec(40, "end", "l", {{"rid", 1}, {"phase", "out"}}), end_marker(100)});
    EXPECT_DOUBLE_EQ(utilization(l, "l", Window{kTimeZero, SimTime{100}}), 0.2);
}

TEST(Utilization, BottleneckFilterIsSaturated) {
    const auto s = fixture("pipeline_bottleneck");
    const auto out = run_scenario(s, {std::nullopt, 20'000'000});
    EXPECT_GE(utilization(out.ledger, "pipe.filter1", Window{SimTime{s.warmup}, SimTime{20'000'000}}), 0.98);
}

TEST(Utilization, UniformPeersShareLoad) {
    // Every peer can handle the service, so each entry serves its own clients.
    auto j = fixture_json("p2p_ttl");
    j["duration_us"] = 60'000'000;
    j["workload"][0]["count"] = 8;
    j["workload"][0]["gap"] = exponential(40'000);
    j["systems"][0]["capabilities"] = json::object();
    for (int i = 0; i < 8; ++i) j["systems"][0]["capabilities"][std::to_string(i)] = {"default"};
    const auto s = scenario_from_json(j);
    const auto out = run_scenario(s);
    double lo = 1.0;
    double hi = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double u = utilization(out.ledger, "net.peer" + std::to_string(i), Window{kTimeZero, SimTime{s.duration}});
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    ASSERT_GT(lo, 0.0);
    EXPECT_LE(hi / lo, 3.0);
}

TEST(Report, NearestRankPercentiles) {
    const std::vector<Micros> v{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    EXPECT_EQ(nearest_rank(v, 50), 50u);
    EXPECT_EQ(nearest_rank(v, 95), 100u);
    EXPECT_EQ(nearest_rank(v, 10), 10u);
    EXPECT_EQ(nearest_rank(v, 0), 10u);
    EXPECT_EQ(nearest_rank({}, 50), 0u);
    EXPECT_EQ(nearest_rank({7}, 95), 7u);
}

TEST(Report, ConservationAndMaxInFlight) {
    const auto l = record({submit(0, 1), submit(1, 2), submit(2, 3), resolve(5, 1, "success"), resolve(6, 2, "failure"),
                           submit(7, 4), resolve(9, 4, "timeout"), end_marker(20)});
    const auto r = make_report(l, Window{kTimeZero, SimTime{20}});
    EXPECT_EQ(r.submitted, 4u);
    EXPECT_EQ(r.submitted, r.success + r.failure + r.timeout + r.censored);
    EXPECT_EQ(r.censored, 1u);
    EXPECT_EQ(r.max_in_flight, 3u);
    EXPECT_EQ(r.failure_reasons.at("no_route"), 1u);
    ASSERT_TRUE(r.availability);
    EXPECT_DOUBLE_EQ(*r.availability, 1.0 / 3.0);
}

TEST(Report, JsonAndCsvShapes) {
    const auto l = record({submit(0, 1), resolve(5, 1, "success"), rec(1, "begin", "w", {{"rid", 1}}),
                           rec(4, "end", "w", {{"rid", 1}}), end_marker(10)});
    const auto r = make_report(l, Window{kTimeZero, SimTime{10}});
    const auto j = to_json(r);
    EXPECT_EQ(j["counts"]["success"], 1);
    EXPECT_EQ(j["latency_p50_us"], 5);
    EXPECT_TRUE(j["utilization"].contains("w"));
    const auto csv = to_csv(r);
    EXPECT_EQ(csv.rfind("metric,component,value\n", 0), 0u);
    EXPECT_NE(csv.find("utilization,w,0.3"), std::string::npos);
    EXPECT_NE(csv.find("success,,1\n"), std::string::npos);
}

TEST(Report, PipelineBeatsLayeredAndLayeredDecreasesWithDepth) {
    double prev_layered = 1e9;
    for (std::size_t n : {2u, 3u, 4u}) {
        const auto ls = scenario_from_json(layered_chain_json(n, 10'000, 10'000'000));
        const auto ps = scenario_from_json(pipeline_json(n, 10'000, 10'000'000));
        const Window w{SimTime{ls.warmup}, SimTime{ls.duration}};
        const double layered = throughput(run_scenario(ls).ledger, w);
        const double pipeline = throughput(run_scenario(ps).ledger, w);
        EXPECT_GT(pipeline, layered) << n;
        EXPECT_LE(layered, prev_layered) << n;
        prev_layered = layered;
    }
}
