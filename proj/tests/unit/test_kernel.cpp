#include "test_support.hpp"

#include <archsim/engine.hpp>
#include <archsim/simulation.hpp>

#include <gtest/gtest.h>

using namespace archsim;
using archsim::testing::fixture;

namespace {

SimEvent timer_event(Micros t, ComponentId target, std::uint64_t id = 777) {
    return SimEvent{SimTime{t}, 0, target, SimEvent::Timer{id}};
}

BehaviorState sink() { return SinkState{}; }

struct Captured {
    std::vector<std::string> lines;
    void attach(Engine& e) {
        e.trace().add_line_sink([this](const std::string& l) { lines.push_back(l); });
    }
    std::vector<TraceRecord> records() const {
        std::vector<TraceRecord> out;
        for (const auto& l : lines) out.push_back(TraceRecord::parse(l));
        return out;
    }
};

}  // namespace

TEST(Kernel, FirstScheduleOnEmptyEngineGetsSeqZero) {
    Engine e(1);
    const auto h = e.schedule(timer_event(0, ComponentId{0, 0}));
    EXPECT_EQ(h.seq, 0u);
    EXPECT_EQ(h.time, kTimeZero);
}

TEST(Kernel, SeqStrictlyIncreasesInSchedulingOrder) {
    Engine e(1);
    std::uint64_t last = 0;
    for (int i = 0; i < 10; ++i) {
        const auto h = e.schedule(timer_event(static_cast<Micros>(100 - i), ComponentId{0, 0}));
        if (i > 0) EXPECT_GT(h.seq, last);
        last = h.seq;
    }
}

TEST(Kernel, SameTimeEventsDequeueInSchedulingOrder) {
    Engine e(1);
    const auto first = e.schedule(timer_event(3, ComponentId{0, 0}, 1));
    const auto second = e.schedule(timer_event(3, ComponentId{0, 0}, 2));
    const auto a = e.step();
    const auto b = e.step();
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->seq, first.seq);
    EXPECT_EQ(b->seq, second.seq);
}

TEST(Kernel, LeastTimeDequeuesFirstRegardlessOfSeq) {
    Engine e(1);
    e.schedule(timer_event(9, ComponentId{0, 0}));
    e.schedule(timer_event(4, ComponentId{0, 0}));
    const auto ev = e.step();
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->time.micros, 4u);
    EXPECT_EQ(e.now().micros, 4u);
}

TEST(Kernel, SchedulingInThePastThrows) {
    Engine e(1);
    e.schedule(timer_event(10, ComponentId{0, 0}));
    e.step();
    ASSERT_EQ(e.now().micros, 10u);
    EXPECT_THROW(e.schedule(timer_event(5, ComponentId{0, 0})), SchedulingInPast);
    EXPECT_NO_THROW(e.schedule(timer_event(10, ComponentId{0, 0})));
}

TEST(Kernel, EmptyQueueSignalsExhaustion) {
    Engine e(1);
    EXPECT_FALSE(e.step().has_value());
    EXPECT_EQ(e.now(), kTimeZero);
}

TEST(Kernel, CancelRemovesEvent) {
    Engine e(1);
    const auto h = e.schedule(timer_event(5, ComponentId{0, 0}));
    EXPECT_TRUE(e.cancel(h));
    EXPECT_FALSE(e.cancel(h));
    EXPECT_FALSE(e.step().has_value());
}

TEST(Kernel, RunUntilZeroProcessesTheEventAtZero) {
    Engine e(1);
    e.schedule(timer_event(0, ComponentId{0, 0}));
    EXPECT_EQ(e.run_until(kTimeZero), 1u);
}

TEST(Kernel, RunUntilIsIdempotent) {
    Engine e(1);
    e.schedule(timer_event(1, ComponentId{0, 0}));
    e.schedule(timer_event(2, ComponentId{0, 0}));
    e.schedule(timer_event(50, ComponentId{0, 0}));
    EXPECT_EQ(e.run_until(SimTime{10}), 2u);
    EXPECT_EQ(e.run_until(SimTime{10}), 0u);
    EXPECT_EQ(e.pending_events(), 1u);
    // The clock stops at the last processed event, not at the bound.
    EXPECT_EQ(e.now().micros, 2u);
}

TEST(Kernel, RunUntilBeforeNowThrows) {
    Engine e(1);
    e.schedule(timer_event(8, ComponentId{0, 0}));
    e.run_until(SimTime{8});
    EXPECT_THROW(e.run_until(SimTime{3}), SchedulingInPast);
}

TEST(Kernel, AddComponentSchedulesItsStart) {
    Engine e(1);
    const auto id = e.add_component("s", "sys", sink(), sink);
    EXPECT_EQ(id.ordinal, 0u);
    EXPECT_EQ(e.pending_events(), 1u);
    EXPECT_EQ(e.next_seq(), 1u);
    EXPECT_EQ(e.find("s"), id);
    EXPECT_EQ(e.role(id), Role::Sink);
    EXPECT_THROW(e.add_component("s", "sys", sink(), sink), Error);
}

TEST(Kernel, EventForCrashedComponentIsDroppedWithTraceRecord) {
    Engine e(1);
    Captured cap;
    cap.attach(e);
    const auto target = e.add_component("sink", "sys", sink(), sink);
    const auto sender = e.add_component("other", "sys", sink(), sink);
    e.run_until(kTimeZero);

    Message reply = Message::request(1, "x", kNoComponent, kTimeZero).as_reply();
    e.schedule(SimEvent{SimTime{5}, 0, target, SimEvent::Deliver{sender, reply}});
    e.run_until(SimTime{5});
    EXPECT_EQ(std::get<SinkState>(e.state(target)).outputs, 1u);

    e.crash(target);
    EXPECT_EQ(e.status(target), ComponentStatus::Crashed);
    e.schedule(SimEvent{SimTime{9}, 0, target, SimEvent::Deliver{sender, reply}});
    e.run_until(SimTime{9});
    EXPECT_EQ(std::get<SinkState>(e.state(target)).outputs, 1u);

    const auto recs = cap.records();
    ASSERT_FALSE(recs.empty());
    EXPECT_EQ(recs.back().type, "drop_dead_target");
    EXPECT_EQ(recs.back().comp, "kernel");
    EXPECT_EQ(recs.back().text("to"), "sink");
}

TEST(Kernel, RestartBumpsGenerationAndStaleDeliveriesAreDropped) {
    Engine e(1);
    Captured cap;
    cap.attach(e);
    const auto target = e.add_component("sink", "sys", sink(), sink);
    const auto sender = e.add_component("other", "sys", sink(), sink);
    e.run_until(kTimeZero);
    e.crash(target);
    EXPECT_THROW(e.restart(sender), RestartOfLiveComponent);
    e.restart(target);
    const auto fresh = e.current_id(target.ordinal);
    EXPECT_EQ(fresh.generation, target.generation + 1);
    EXPECT_TRUE(e.alive(fresh));

    Message reply = Message::request(1, "x", kNoComponent, kTimeZero).as_reply();
    e.schedule(SimEvent{SimTime{1}, 0, target, SimEvent::Deliver{sender, reply}});  // old generation
    e.run_until(SimTime{1});
    EXPECT_EQ(std::get<SinkState>(e.state(fresh)).outputs, 0u);
    EXPECT_EQ(cap.records().back().type, "drop_dead_target");
}

TEST(Kernel, UnknownTargetIsDroppedNotFatal) {
    Engine e(1);
    Captured cap;
    cap.attach(e);
    e.schedule(timer_event(0, ComponentId{42, 0}));
    EXPECT_TRUE(e.step().has_value());
    ASSERT_EQ(cap.lines.size(), 1u);
    EXPECT_EQ(cap.records()[0].type, "drop_unknown_target");
}

TEST(Kernel, FaultsOnUnknownNamesThrow) {
    Engine e(1);
    EXPECT_THROW(e.crash(ComponentId{3, 0}), UnknownComponent);
    EXPECT_THROW(e.restart(ComponentId{3, 0}), UnknownComponent);
}

TEST(Kernel, TraceLinesUseFixedKeyOrder) {
    TraceRecord r;
    r.t = SimTime{12};
    r.seq = 3;
    r.type = "recv";
    r.comp = "a.b";
    r.fields = {{"zeta", 1}, {"alpha", "x"}, {"mid", 2}};
    EXPECT_EQ(r.to_line(), R"({"t":12,"seq":3,"type":"recv","comp":"a.b","alpha":"x","mid":2,"zeta":1})");
    const auto back = TraceRecord::parse(r.to_line());
    EXPECT_EQ(back.to_line(), r.to_line());
}

TEST(Kernel, MalformedTraceLineThrows) {
    EXPECT_THROW(TraceRecord::parse("{not json"), MalformedTrace);
    EXPECT_THROW(TraceRecord::parse(R"({"t":1,"type":"x"})"), MalformedTrace);
}

TEST(Kernel, ThreeLayerSecondIsDeterministic) {
    Simulation::Overrides o;
    o.duration = 2'000'000;
    const auto a = run_scenario(fixture("layered_chain"), o);
    const auto b = run_scenario(fixture("layered_chain"), o);
    EXPECT_GT(a.events, 100u);
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(a.trace, b.trace);
}

TEST(Kernel, ProcessingOrderMatchesTimeSeqOrder) {
    Simulation::Overrides o;
    o.duration = 2'000'000;
    Simulation sim(fixture("pipeline_bottleneck"), o);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> order;
    sim.engine().set_after_event([&](const SimEvent& ev) { order.emplace_back(ev.time.micros, ev.seq); });
    sim.start();
    sim.finish(SimTime{2'000'000});
    ASSERT_GT(order.size(), 100u);
    for (std::size_t i = 1; i < order.size(); ++i) ASSERT_LT(order[i - 1], order[i]) << "at event " << i;
}
