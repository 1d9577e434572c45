#include "archsim/behaviors.hpp"

#include "archsim/metrics.hpp"
#include "archsim/workload.hpp"

#include <algorithm>
#include <cmath>

namespace archsim {
namespace {

using nlohmann::json;

ComponentId slot_of(ComponentId id) { return ComponentId{id.ordinal, 0}; }

act::Note note(std::string type, json fields) { return act::Note{std::move(type), std::move(fields)}; }

act::Note violation(const Message& msg, ComponentId from, const char* reason, Context& ctx) {
    return note("protocol_violation", {{"rid", msg.request_id}, {"from", ctx.name_of(from)}, {"reason", reason}});
}

void append(Actions& into, Actions&& more) {
    for (auto& a : more) into.push_back(std::move(a));
}

// Single-in-flight servers (filters, services, workers, handling peers) share
// one mailbox discipline: begin when idle, otherwise defer in FIFO order.

template <class S>
Actions begin_serving(S& s, Inbound in, const Distribution& proc, Context& ctx) {
    Actions out;
    const std::uint64_t rid = in.msg.request_id;
    s.mode = Mode::Processing;
    s.current = std::move(in);
    out.push_back(note("begin", {{"rid", rid}}));
    out.push_back(act::SetTimer{timer::make(timer::Kind::ProcDone, rid), proc.sample(ctx.rng())});
    return out;
}

template <class S>
Actions accept_or_defer(S& s, Inbound in, const Distribution& proc, Context& ctx) {
    if (s.mode == Mode::Idle) return begin_serving(s, std::move(in), proc, ctx);
    const std::uint64_t rid = in.msg.request_id;
    s.deferred.push_back(std::move(in));
    return {note("defer", {{"rid", rid}, {"queue", s.deferred.size()}})};
}

/// Ends the current job, lets `emit` produce its output, then starts the next deferred one.
template <class S, class Emit>
Actions finish_serving(S& s, std::uint64_t timer_id, const Distribution& proc, Context& ctx, Emit&& emit) {
    if (s.mode != Mode::Processing || !s.current || s.current->msg.request_id != timer::token_of(timer_id)) return {};
    Actions out;
    Inbound done = std::move(*s.current);
    s.current.reset();
    s.mode = Mode::Idle;
    out.push_back(note("end", {{"rid", done.msg.request_id}}));
    append(out, emit(done));
    if (!s.deferred.empty()) {
        Inbound next = std::move(s.deferred.front());
        s.deferred.pop_front();
        append(out, begin_serving(s, std::move(next), proc, ctx));
    }
    return out;
}

}  // namespace

const char* to_string(Mode mode) {
    switch (mode) {
        case Mode::Idle: return "idle";
        case Mode::Processing: return "processing";
        case Mode::ProcessingIn: return "processing_in";
        case Mode::AwaitingReply: return "awaiting_reply";
        case Mode::ProcessingOut: return "processing_out";
    }
    return "?";
}

std::uint64_t probability_threshold(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return std::uint64_t{1} << 32U;
    return static_cast<std::uint64_t>(std::floor(p * 4294967296.0));
}

// ---------------------------------------------------------------- layers

namespace {

Actions layer_begin(LayerState& s, Inbound in, Context& ctx) {
    const std::uint64_t rid = in.msg.request_id;
    s.mode = Mode::ProcessingIn;
    s.current = std::move(in);
    return {note("begin", {{"rid", rid}, {"phase", "in"}}),
            act::SetTimer{timer::make(timer::Kind::ProcIn, rid), s.proc_in.sample(ctx.rng())}};
}

Actions layer_begin_out(LayerState& s, Message reply, Context& ctx) {
    const std::uint64_t rid = reply.request_id;
    s.mode = Mode::ProcessingOut;
    s.outgoing = std::move(reply);
    return {note("begin", {{"rid", rid}, {"phase", "out"}}),
            act::SetTimer{timer::make(timer::Kind::ProcOut, rid), s.proc_out.sample(ctx.rng())}};
}

Actions layer_next_deferred(LayerState& s, Context& ctx) {
    s.mode = Mode::Idle;
    s.current.reset();
    s.outgoing.reset();
    if (s.deferred.empty()) return {};
    Inbound next = std::move(s.deferred.front());
    s.deferred.pop_front();
    return layer_begin(s, std::move(next), ctx);
}

}  // namespace

Actions layer_on_message(LayerState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind == MessageKind::Request) {
        const bool from_prev = s.prev ? from.same_slot(*s.prev) : ctx.role_of(from) == Role::Client;
        if (!from_prev) return {violation(msg, from, "not_from_previous", ctx)};
        if (s.mode != Mode::Idle) {
            s.deferred.push_back({msg, from});
            return {note("defer", {{"rid", msg.request_id}, {"queue", s.deferred.size()}})};
        }
        return layer_begin(s, Inbound{msg, from}, ctx);
    }
    // Replies and failures may only come back from `next`, for the request in flight.
    if (!s.next || !from.same_slot(*s.next) || s.mode != Mode::AwaitingReply || !s.current ||
        s.current->msg.request_id != msg.request_id) {
        return {violation(msg, from, "unexpected_reply", ctx)};
    }
    Actions out;
    if (s.downstream_timeout > 0)
        out.push_back(act::CancelTimer{timer::make(timer::Kind::DownstreamTimeout, msg.request_id)});
    append(out, layer_begin_out(s, msg, ctx));
    return out;
}

Actions layer_on_timer(LayerState& s, std::uint64_t timer_id, Context& ctx) {
    const auto kind = timer::kind_of(timer_id);
    const std::uint64_t rid = timer::token_of(timer_id);
    if (!s.current || s.current->msg.request_id != rid) return {};
    switch (kind) {
        case timer::Kind::ProcIn: {
            if (s.mode != Mode::ProcessingIn) return {};
            Actions out{note("end", {{"rid", rid}, {"phase", "in"}})};
            if (s.next) {
                s.mode = Mode::AwaitingReply;
                out.push_back(act::Send{*s.next, s.current->msg});
                if (s.downstream_timeout > 0)
                    out.push_back(act::SetTimer{timer::make(timer::Kind::DownstreamTimeout, rid), s.downstream_timeout});
                return out;
            }
            append(out, layer_begin_out(s, s.current->msg.as_reply(), ctx));
            return out;
        }
        case timer::Kind::ProcOut: {
            if (s.mode != Mode::ProcessingOut || !s.outgoing) return {};
            Actions out{note("end", {{"rid", rid}, {"phase", "out"}}), act::Send{s.current->from, *s.outgoing}};
            append(out, layer_next_deferred(s, ctx));
            return out;
        }
        case timer::Kind::DownstreamTimeout: {
            if (s.mode != Mode::AwaitingReply) return {};
            Actions out{note("downstream_timeout", {{"rid", rid}}),
                        act::Send{s.current->from, s.current->msg.as_failure("downstream_timeout")}};
            append(out, layer_next_deferred(s, ctx));
            return out;
        }
        default: return {};
    }
}

// ---------------------------------------------------------------- filters and sink

Actions filter_on_message(FilterState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind != MessageKind::Request) return {violation(msg, from, "reply_to_filter", ctx)};
    const bool from_prev = s.accept_from.empty()
                               ? ctx.role_of(from) == Role::Client
                               : std::any_of(s.accept_from.begin(), s.accept_from.end(),
                                             [&](ComponentId p) { return p.same_slot(from); });
    if (!from_prev) return {violation(msg, from, "not_from_previous", ctx)};
    return accept_or_defer(s, Inbound{msg, from}, s.proc, ctx);
}

Actions filter_on_timer(FilterState& s, std::uint64_t timer_id, Context& ctx) {
    if (timer::kind_of(timer_id) != timer::Kind::ProcDone) return {};
    return finish_serving(s, timer_id, s.proc, ctx, [&](const Inbound& done) -> Actions {
        if (s.next.empty()) return {};
        const ComponentId to = s.next[s.cursor % s.next.size()];
        ++s.cursor;
        return {act::Send{to, s.last ? done.msg.as_reply() : done.msg}};
    });
}

Actions sink_on_message(SinkState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind != MessageKind::Reply) return {violation(msg, from, "request_to_sink", ctx)};
    ++s.outputs;
    return {note("output", {{"rid", msg.request_id}}), act::Send{msg.origin_client, msg}};
}

// ---------------------------------------------------------------- client-server

Actions directory_on_message(DirectoryState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind != MessageKind::Request) return {violation(msg, from, "reply_to_directory", ctx)};
    const auto it = s.catalogue.find(msg.service);
    if (it == s.catalogue.end() || it->second.empty()) {
        return {note("no_route", {{"rid", msg.request_id}, {"service", msg.service}}),
                act::Send{msg.origin_client, msg.as_failure("no_route")}};
    }
    std::size_t& cursor = s.route_cursor[msg.service];
    const ComponentId to = it->second[cursor % it->second.size()];
    ++cursor;
    return {act::Send{to, msg, s.route_delay.sample(ctx.rng())}};
}

Actions service_on_message(ServiceState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind != MessageKind::Request) return {violation(msg, from, "reply_to_service", ctx)};
    if (ctx.role_of(from) != Role::Directory) return {violation(msg, from, "direct_client_request", ctx)};
    return accept_or_defer(s, Inbound{msg, from}, s.proc, ctx);
}

Actions service_on_timer(ServiceState& s, std::uint64_t timer_id, Context& ctx) {
    if (timer::kind_of(timer_id) != timer::Kind::ProcDone) return {};
    return finish_serving(s, timer_id, s.proc, ctx, [](const Inbound& done) -> Actions {
        return {act::Send{done.msg.origin_client, done.msg.as_reply()}};
    });
}

// ---------------------------------------------------------------- leader-follower

namespace {

using WorkerView = LeaderState::WorkerView;

std::optional<std::size_t> find_worker(const LeaderState& s, ComponentId id) {
    for (std::size_t i = 0; i < s.workers.size(); ++i)
        if (s.workers[i].id.same_slot(id)) return i;
    return std::nullopt;
}

std::optional<std::size_t> choose_idle(LeaderState& s, const std::vector<std::size_t>& exclude, Context& ctx) {
    auto usable = [&](std::size_t i) {
        return s.workers[i].outstanding == 0 && std::find(exclude.begin(), exclude.end(), i) == exclude.end();
    };
    const std::size_t n = s.workers.size();
    if (n == 0) return std::nullopt;
    switch (s.cfg.policy) {
        case DispatchPolicy::RoundRobin:
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i = (s.cursor + k) % n;
                if (usable(i)) {
                    s.cursor = i + 1;
                    return i;
                }
            }
            return std::nullopt;
        case DispatchPolicy::LeastBusy:
            for (std::size_t i = 0; i < n; ++i)
                if (usable(i)) return i;
            return std::nullopt;
        case DispatchPolicy::Random: {
            std::vector<std::size_t> idle;
            for (std::size_t i = 0; i < n; ++i)
                if (usable(i)) idle.push_back(i);
            if (idle.empty()) return std::nullopt;
            return idle[ctx.rng().bounded(static_cast<std::uint32_t>(idle.size()))];
        }
    }
    return std::nullopt;
}

/// Least outstanding worker not in `exclude` (or any, if all are excluded).
std::size_t least_busy(const LeaderState& s, const std::vector<std::size_t>& exclude) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < s.workers.size(); ++i) {
        if (std::find(exclude.begin(), exclude.end(), i) != exclude.end()) continue;
        if (!best || s.workers[i].outstanding < s.workers[*best].outstanding) best = i;
    }
    if (best) return *best;
    std::size_t fallback = 0;
    for (std::size_t i = 1; i < s.workers.size(); ++i)
        if (s.workers[i].outstanding < s.workers[fallback].outstanding) fallback = i;
    return fallback;
}

std::size_t spawn(LeaderState& s, Context& ctx, Actions& out) {
    const ComponentId id = ctx.reserve_component();
    out.push_back(act::Spawn{id});
    WorkerView w;
    w.id = id;
    w.idle_since = ctx.now();
    w.ready_at = ctx.now() + s.cfg.spawn_delay;
    s.workers.push_back(w);
    return s.workers.size() - 1;
}

void send_to_worker(LeaderState& s, std::size_t idx, const Message& original, std::optional<Fragment> frag,
                    Context& ctx, Actions& out) {
    WorkerView& w = s.workers[idx];
    const std::uint64_t token = s.next_token++;
    s.dispatches[token] = LeaderState::Dispatch{original.request_id, w.id, frag};
    ++w.outstanding;
    Message m = original;
    m.fragment = frag;
    const Micros startup = w.ready_at > ctx.now() ? w.ready_at - ctx.now() : 0;
    out.push_back(act::Send{w.id, std::move(m), startup});
    if (s.cfg.dispatch_timeout > 0)
        out.push_back(act::SetTimer{timer::make(timer::Kind::DispatchTimeout, token), startup + s.cfg.dispatch_timeout});
}

/// One idle worker, spawning when every worker is busy and the pool may grow.
std::optional<std::size_t> pick_or_spawn(LeaderState& s, const std::vector<std::size_t>& exclude, Context& ctx,
                                         Actions& out) {
    if (auto idx = choose_idle(s, exclude, ctx)) return idx;
    if (s.workers.size() < s.cfg.max_workers) return spawn(s, ctx, out);
    return std::nullopt;
}

void dispatch(LeaderState& s, const Message& msg, Context& ctx, Actions& out) {
    const bool single = s.cfg.fanout.mode == Fanout::Mode::Single;
    const std::uint32_t k = single ? 1 : std::max<std::uint32_t>(1, s.cfg.fanout.k);
    std::vector<std::size_t> chosen;
    while (chosen.size() < k) {
        auto idx = pick_or_spawn(s, chosen, ctx, out);
        if (!idx) break;
        chosen.push_back(*idx);
    }
    if (chosen.empty()) {
        s.backlog.push_back(msg);
        out.push_back(note("capacity_exhausted", {{"rid", msg.request_id}, {"backlog", s.backlog.size()}}));
        return;
    }
    while (chosen.size() < k) chosen.push_back(least_busy(s, chosen));

    LeaderState::Gather g;
    g.original = msg;
    g.needed = s.cfg.fanout.mode == Fanout::Mode::Split ? k : 1;
    s.pending_gather[msg.request_id] = std::move(g);
    for (std::uint32_t i = 0; i < k; ++i) {
        std::optional<Fragment> frag;
        if (s.cfg.fanout.mode == Fanout::Mode::Split) frag = Fragment{i, k};
        send_to_worker(s, chosen[i], msg, frag, ctx, out);
    }
}

void drain_backlog(LeaderState& s, Context& ctx, Actions& out) {
    while (!s.backlog.empty()) {
        if (!choose_idle(s, {}, ctx) && s.workers.size() >= s.cfg.max_workers) return;
        Message m = std::move(s.backlog.front());
        s.backlog.pop_front();
        dispatch(s, m, ctx, out);
    }
}

/// Re-sends work whose worker is gone.
void redispatch(LeaderState& s, const LeaderState::Dispatch& d, Context& ctx, Actions& out) {
    const auto g = s.pending_gather.find(d.request_id);
    if (g == s.pending_gather.end()) return;
    if (s.cfg.fanout.mode == Fanout::Mode::Replicate) {
        const bool copies_left = std::any_of(s.dispatches.begin(), s.dispatches.end(),
                                             [&](const auto& kv) { return kv.second.request_id == d.request_id; });
        if (copies_left) return;
    }
    out.push_back(note("redispatch", {{"rid", d.request_id}}));
    if (s.cfg.fanout.mode == Fanout::Mode::Single) {
        auto idx = pick_or_spawn(s, {}, ctx, out);
        if (!idx) {
            s.pending_gather.erase(g);
            s.backlog.push_back(g->second.original);
            return;
        }
        send_to_worker(s, *idx, g->second.original, std::nullopt, ctx, out);
        return;
    }
    auto idx = pick_or_spawn(s, {}, ctx, out);
    if (!idx) {
        if (s.workers.empty()) return;
        idx = least_busy(s, {});
    }
    send_to_worker(s, *idx, g->second.original, d.fragment, ctx, out);
}

void ensure_min_workers(LeaderState& s, Context& ctx, Actions& out) {
    while (s.workers.size() < s.cfg.min_workers) spawn(s, ctx, out);
}

/// Drops a worker from the pool and re-sends whatever it still held.
void remove_worker(LeaderState& s, std::size_t idx, Context& ctx, Actions& out) {
    const ComponentId id = s.workers[idx].id;
    s.workers.erase(s.workers.begin() + static_cast<std::ptrdiff_t>(idx));
    if (s.cursor > idx) --s.cursor;
    std::vector<LeaderState::Dispatch> orphaned;
    for (auto it = s.dispatches.begin(); it != s.dispatches.end();) {
        if (it->second.worker.same_slot(id)) {
            orphaned.push_back(it->second);
            out.push_back(act::CancelTimer{timer::make(timer::Kind::DispatchTimeout, it->first)});
            it = s.dispatches.erase(it);
        } else {
            ++it;
        }
    }
    for (const auto& d : orphaned) redispatch(s, d, ctx, out);
}

}  // namespace

Actions leader_on_start(LeaderState& s, Context& ctx) {
    for (auto& w : s.workers) {
        w.idle_since = ctx.now();
        w.ready_at = ctx.now();
    }
    if (s.cfg.idle_check_period == 0) return {};
    return {act::SetTimer{timer::make(timer::Kind::IdleCheck), s.cfg.idle_check_period}};
}

Actions leader_on_message(LeaderState& s, const Message& msg, ComponentId from, Context& ctx) {
    Actions out;
    if (msg.kind == MessageKind::Request) {
        if (ctx.role_of(from) != Role::Client) return {violation(msg, from, "request_from_non_client", ctx)};
        dispatch(s, msg, ctx, out);
        return out;
    }
    if (ctx.role_of(from) != Role::Worker) return {violation(msg, from, "reply_from_non_worker", ctx)};

    for (auto it = s.dispatches.begin(); it != s.dispatches.end(); ++it) {
        const auto& d = it->second;
        if (d.worker.same_slot(from) && d.request_id == msg.request_id && d.fragment == msg.fragment) {
            out.push_back(act::CancelTimer{timer::make(timer::Kind::DispatchTimeout, it->first)});
            s.dispatches.erase(it);
            if (auto idx = find_worker(s, from)) {
                auto& w = s.workers[*idx];
                if (w.outstanding > 0 && --w.outstanding == 0) w.idle_since = ctx.now();
            }
            break;
        }
    }

    const auto g = s.pending_gather.find(msg.request_id);
    if (g == s.pending_gather.end()) {
        out.push_back(note("dup_discard", {{"rid", msg.request_id}}));
    } else {
        bool done = true;
        if (s.cfg.fanout.mode == Fanout::Mode::Split) {
            if (msg.fragment) g->second.got.insert(msg.fragment->index);
            done = g->second.got.size() >= g->second.needed;
            if (!done) out.push_back(note("gather", {{"rid", msg.request_id}, {"got", g->second.got.size()}}));
        }
        if (done) {
            Message reply = g->second.original.as_reply();
            reply.fragment.reset();
            reply.hops = msg.hops;
            out.push_back(act::Send{reply.origin_client, std::move(reply)});
            s.completed.insert(msg.request_id);
            s.pending_gather.erase(g);
        }
    }
    drain_backlog(s, ctx, out);
    return out;
}

Actions leader_on_timer(LeaderState& s, std::uint64_t timer_id, Context& ctx) {
    Actions out;
    switch (timer::kind_of(timer_id)) {
        case timer::Kind::IdleCheck: {
            // Newest workers go first so the long-lived core of the pool stays put.
            for (std::size_t i = s.workers.size(); i-- > 0;) {
                if (s.workers.size() <= s.cfg.min_workers) break;
                const auto& w = s.workers[i];
                if (w.outstanding == 0 && ctx.now() - w.idle_since >= s.cfg.idle_stop_threshold) {
                    out.push_back(act::Stop{w.id});
                    remove_worker(s, i, ctx, out);
                }
            }
            out.push_back(act::SetTimer{timer::make(timer::Kind::IdleCheck), s.cfg.idle_check_period});
            return out;
        }
        case timer::Kind::DispatchTimeout: {
            const auto it = s.dispatches.find(timer::token_of(timer_id));
            if (it == s.dispatches.end()) return {};
            const LeaderState::Dispatch lost = it->second;
            out.push_back(note("worker_lost", {{"rid", lost.request_id}, {"worker", ctx.name_of(lost.worker)}}));
            if (auto idx = find_worker(s, lost.worker)) {
                out.push_back(act::Stop{lost.worker});
                remove_worker(s, *idx, ctx, out);
            } else {
                s.dispatches.erase(it);
                redispatch(s, lost, ctx, out);
            }
            ensure_min_workers(s, ctx, out);
            drain_backlog(s, ctx, out);
            return out;
        }
        default: return {};
    }
}

ControlOutcome leader_spawn_worker(LeaderState& s, Context& ctx) {
    ControlOutcome r;
    if (s.workers.size() >= s.cfg.max_workers) {
        r.error = "max_workers";
        return r;
    }
    spawn(s, ctx, r.actions);
    drain_backlog(s, ctx, r.actions);
    return r;
}

ControlOutcome leader_stop_worker(LeaderState& s, ComponentId worker, Context& ctx) {
    ControlOutcome r;
    const auto idx = find_worker(s, worker);
    if (!idx) {
        r.error = "unknown_worker";
        return r;
    }
    if (s.workers.size() <= s.cfg.min_workers) {
        r.error = "min_workers";
        return r;
    }
    r.actions.push_back(act::Stop{s.workers[*idx].id});
    remove_worker(s, *idx, ctx, r.actions);
    return r;
}

Actions worker_on_message(WorkerState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (!from.same_slot(s.leader)) return {violation(msg, from, "not_from_leader", ctx)};
    if (msg.kind != MessageKind::Request) return {violation(msg, from, "reply_to_worker", ctx)};
    return accept_or_defer(s, Inbound{msg, from}, s.proc, ctx);
}

Actions worker_on_timer(WorkerState& s, std::uint64_t timer_id, Context& ctx) {
    if (timer::kind_of(timer_id) != timer::Kind::ProcDone) return {};
    auto out = finish_serving(s, timer_id, s.proc, ctx, [&](const Inbound& done) -> Actions {
        return {act::Send{s.leader, done.msg.as_reply()}};
    });
    if (s.mode == Mode::Idle) s.idle_since = ctx.now();
    return out;
}

// ---------------------------------------------------------------- peer-to-peer

namespace {

/// Sends `msg` one hop back along its return path.
Actions send_back(Message msg, ComponentId from, Context& ctx) {
    if (msg.hop_path.empty()) return {violation(msg, from, "empty_return_path", ctx)};
    const ComponentId to = msg.hop_path.back();
    msg.hop_path.pop_back();
    return {act::Send{to, std::move(msg)}};
}

bool on_path(const Message& msg, ComponentId id) {
    return std::any_of(msg.hop_path.begin(), msg.hop_path.end(), [&](ComponentId p) { return p.same_slot(id); });
}

}  // namespace

Actions peer_on_start(PeerState& s, Context&) {
    if (s.maintenance_period == 0) return {};
    return {act::SetTimer{timer::make(timer::Kind::Maintenance), s.maintenance_period}};
}

Actions peer_on_message(PeerState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (s.flag == PeerFlag::SilentDrop) return {note("silent_drop", {{"rid", msg.request_id}})};

    if (msg.kind != MessageKind::Request) return send_back(msg, from, ctx);

    if (s.seen.contains(msg.request_id)) return {note("dup_suppressed", {{"rid", msg.request_id}})};
    s.seen.insert(msg.request_id);

    if (s.can_handle.contains(msg.service)) return accept_or_defer(s, Inbound{msg, from}, s.proc, ctx);

    std::optional<std::uint32_t> ttl = msg.ttl_hops;
    if (ttl) {
        ttl = *ttl > 0 ? *ttl - 1 : 0;
        if (*ttl == 0) {
            Actions out{note("ttl_expired", {{"rid", msg.request_id}})};
            append(out, send_back(msg.as_failure("ttl_expired"), from, ctx));
            return out;
        }
    }

    std::vector<ComponentId> candidates;
    for (ComponentId n : s.neighbours)
        if (!n.same_slot(from) && !n.same_slot(ctx.self()) && !on_path(msg, n)) candidates.push_back(n);
    if (candidates.empty()) {
        Actions out{note("no_route", {{"rid", msg.request_id}})};
        append(out, send_back(msg.as_failure("no_route"), from, ctx));
        return out;
    }
    const std::size_t fanout = std::min<std::size_t>(std::max<std::uint32_t>(1, s.forward_fanout), candidates.size());
    if (fanout < candidates.size()) {
        // Partial Fisher-Yates: the first `fanout` entries become a uniform sample.
        for (std::size_t i = 0; i < fanout; ++i) {
            const auto j = i + ctx.rng().bounded(static_cast<std::uint32_t>(candidates.size() - i));
            std::swap(candidates[i], candidates[j]);
        }
        candidates.resize(fanout);
    }
    Actions out;
    for (ComponentId n : candidates) {
        Message m = msg;
        m.ttl_hops = ttl;
        m.hop_path.push_back(slot_of(ctx.self()));
        out.push_back(act::Send{n, std::move(m)});
    }
    return out;
}

Actions peer_on_timer(PeerState& s, std::uint64_t timer_id, Context& ctx) {
    switch (timer::kind_of(timer_id)) {
        case timer::Kind::ProcDone:
            return finish_serving(s, timer_id, s.proc, ctx, [&](const Inbound& done) -> Actions {
                if (s.flag == PeerFlag::SilentDrop) return {note("silent_drop", {{"rid", done.msg.request_id}})};
                return send_back(done.msg.as_reply(), done.from, ctx);
            });
        case timer::Kind::Maintenance: {
            Actions out;
            const std::set<ComponentId> current = s.neighbours;
            for (ComponentId n : current) {
                const bool dismiss = !ctx.is_alive(n) || (s.churn_threshold > 0 && ctx.rng().next() < s.churn_threshold);
                if (dismiss) {
                    s.neighbours.erase(n);
                    out.push_back(act::Link{n, false});
                }
            }
            if (s.neighbours.size() < s.target_degree) {
                std::vector<ComponentId> candidates;
                for (ComponentId p : ctx.live_peers()) {
                    const ComponentId slot = slot_of(p);
                    if (!p.same_slot(ctx.self()) && !s.neighbours.contains(slot)) candidates.push_back(slot);
                }
                while (s.neighbours.size() < s.target_degree && !candidates.empty()) {
                    const auto i = ctx.rng().bounded(static_cast<std::uint32_t>(candidates.size()));
                    s.neighbours.insert(candidates[i]);
                    out.push_back(act::Link{candidates[i], true});
                    candidates.erase(candidates.begin() + i);
                }
            }
            out.push_back(act::SetTimer{timer::make(timer::Kind::Maintenance), s.maintenance_period});
            return out;
        }
        default: return {};
    }
}

// ---------------------------------------------------------------- clients

namespace {

ComponentId pick_entry(ClientState& s) {
    const std::size_t n = s.entry_points.size();
    if (n == 0) return kNoComponent;
    bool all_suspect = true;
    for (ComponentId e : s.entry_points)
        if (!s.suspect.contains(e.ordinal)) all_suspect = false;
    if (all_suspect) s.suspect.clear();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (s.entry_cursor + k) % n;
        if (!s.suspect.contains(s.entry_points[i].ordinal)) {
            s.entry_cursor = i + 1;
            return s.entry_points[i];
        }
    }
    return s.entry_points[0];
}

void send_attempt(ClientState& s, std::uint64_t rid, ClientState::Outstanding& o, Context& ctx, Actions& out) {
    o.entry = pick_entry(s);
    Message m = Message::request(rid, o.service, ctx.self(), o.submitted_at);
    m.ttl_hops = s.cfg.ttl_hops;
    if (s.cfg.return_path) m.hop_path.push_back(slot_of(ctx.self()));
    if (!o.entry.valid()) {
        out.push_back(note("no_entry", {{"rid", rid}}));
        return;
    }
    out.push_back(note(o.attempts == 1 ? "submit" : "retry",
                       {{"rid", rid}, {"entry", ctx.name_of(o.entry)}, {"attempt", o.attempts}}));
    out.push_back(act::Send{o.entry, std::move(m)});
    if (s.cfg.timeout > 0) out.push_back(act::SetTimer{timer::make(timer::Kind::Timeout, rid), s.cfg.timeout});
}

void submit(ClientState& s, const std::string& service, Context& ctx, Actions& out) {
    const std::uint64_t rid = ctx.new_request_id();
    ClientState::Outstanding o;
    o.submitted_at = ctx.now();
    o.service = service;
    auto& slot = s.outstanding[rid] = std::move(o);
    send_attempt(s, rid, slot, ctx, out);
}

void schedule_arrival(ClientState& s, Context& ctx, Actions& out) {
    const SimTime next = arrival_process(s, ctx.rng(), ctx.now());
    out.push_back(act::SetTimer{timer::make(timer::Kind::Arrival), next - ctx.now()});
}

void resolve(ClientState& s, std::uint64_t rid, Outcome outcome, const std::string& reason, std::uint32_t hops,
             Context& ctx, Actions& out) {
    const auto it = s.outstanding.find(rid);
    if (it == s.outstanding.end()) return;
    json fields{{"rid", rid},
                {"outcome", to_string(outcome)},
                {"latency", ctx.now() - it->second.submitted_at},
                {"submitted", it->second.submitted_at.micros},
                {"hops", hops},
                {"attempts", it->second.attempts}};
    if (!reason.empty()) fields["reason"] = reason;
    out.push_back(note("resolve", std::move(fields)));
    if (s.cfg.timeout > 0) out.push_back(act::CancelTimer{timer::make(timer::Kind::Timeout, rid)});
    if (it->second.held_failure) out.push_back(act::CancelTimer{timer::make(timer::Kind::Grace, rid)});
    s.outstanding.erase(it);
    if (s.cfg.loop == LoopMode::Closed && s.arrivals_on && s.outstanding.empty()) schedule_arrival(s, ctx, out);
}

}  // namespace

Actions client_on_start(ClientState& s, Context& ctx) {
    if (!s.arrivals_on) return {};
    const Micros delay = s.cfg.start > ctx.now().micros ? s.cfg.start - ctx.now().micros : 0;
    return {act::SetTimer{timer::make(timer::Kind::Arrival), delay}};
}

Actions client_tick(ClientState& s, std::uint64_t timer_id, Context& ctx) {
    Actions out;
    const std::uint64_t rid = timer::token_of(timer_id);
    switch (timer::kind_of(timer_id)) {
        case timer::Kind::Arrival:
            if (!s.arrivals_on) return {};
            if (s.cfg.loop == LoopMode::Closed && !s.outstanding.empty()) return {};
            submit(s, s.cfg.service, ctx, out);
            if (s.cfg.loop == LoopMode::Open) schedule_arrival(s, ctx, out);
            return out;
        case timer::Kind::Timeout: {
            const auto it = s.outstanding.find(rid);
            if (it == s.outstanding.end()) return {};
            auto& o = it->second;
            if (o.held_failure) {
                resolve(s, rid, Outcome::Failure, o.held_failure->reason, o.held_failure->hops, ctx, out);
                return out;
            }
            if (s.entry_points.size() > 1 && o.entry.valid()) s.suspect.insert(o.entry.ordinal);
            if (o.attempts < s.cfg.max_attempts) {
                ++o.attempts;
                send_attempt(s, rid, o, ctx, out);
                return out;
            }
            resolve(s, rid, Outcome::Timeout, "", 0, ctx, out);
            return out;
        }
        case timer::Kind::Grace: {
            const auto it = s.outstanding.find(rid);
            if (it == s.outstanding.end() || !it->second.held_failure) return {};
            const Message held = *it->second.held_failure;
            resolve(s, rid, Outcome::Failure, held.reason, held.hops, ctx, out);
            return out;
        }
        default: return {};
    }
}

Actions client_on_message(ClientState& s, const Message& msg, ComponentId from, Context& ctx) {
    if (msg.kind == MessageKind::Request) return {violation(msg, from, "request_to_client", ctx)};
    const auto it = s.outstanding.find(msg.request_id);
    if (it == s.outstanding.end()) return {note("late_reply", {{"rid", msg.request_id}, {"msg", to_string(msg.kind)}})};
    Actions out;
    if (msg.kind == MessageKind::Reply) {
        resolve(s, msg.request_id, Outcome::Success, "", msg.hops, ctx, out);
        return out;
    }
    if (s.cfg.failure_grace == 0) {
        resolve(s, msg.request_id, Outcome::Failure, msg.reason, msg.hops, ctx, out);
        return out;
    }
    if (!it->second.held_failure) {
        it->second.held_failure = msg;
        out.push_back(act::SetTimer{timer::make(timer::Kind::Grace, msg.request_id), s.cfg.failure_grace});
    }
    return out;
}

Actions client_inject(ClientState& s, const std::string& service, std::uint32_t count, Context& ctx) {
    Actions out;
    for (std::uint32_t i = 0; i < count; ++i) submit(s, service, ctx, out);
    return out;
}

Actions client_set_rate(ClientState& s, double rps, Context& ctx) {
    Actions out;
    if (rps <= 0.0) {
        s.arrivals_on = false;
        out.push_back(act::CancelTimer{timer::make(timer::Kind::Arrival)});
        out.push_back(note("rate", {{"gap", 0}}));
        return out;
    }
    const auto gap = static_cast<Micros>(std::llround(1e6 / rps));
    s.cfg.gap = s.cfg.gap.with_value(std::max<Micros>(1, gap));
    out.push_back(note("rate", {{"gap", s.cfg.gap.micros}}));
    if (!s.arrivals_on) {
        s.arrivals_on = true;
        if (s.cfg.loop == LoopMode::Open || s.outstanding.empty()) schedule_arrival(s, ctx, out);
    }
    return out;
}

// ---------------------------------------------------------------- dispatch

Role role_of(const BehaviorState& state) {
    struct V {
        Role operator()(const LayerState&) const { return Role::Layer; }
        Role operator()(const FilterState&) const { return Role::Filter; }
        Role operator()(const SinkState&) const { return Role::Sink; }
        Role operator()(const DirectoryState&) const { return Role::Directory; }
        Role operator()(const ServiceState&) const { return Role::Service; }
        Role operator()(const LeaderState&) const { return Role::Leader; }
        Role operator()(const WorkerState&) const { return Role::Worker; }
        Role operator()(const PeerState&) const { return Role::Peer; }
        Role operator()(const ClientState&) const { return Role::Client; }
    };
    return std::visit(V{}, state);
}

namespace {

struct ActivityOf {
    std::string operator()(const LayerState& s) const {
        if (s.mode == Mode::AwaitingReply) return "blocked";
        return s.mode == Mode::Idle ? "idle" : "processing";
    }
    std::string operator()(const SinkState&) const { return "idle"; }
    std::string operator()(const DirectoryState&) const { return "idle"; }
    std::string operator()(const LeaderState& s) const { return s.backlog.empty() ? "idle" : "blocked"; }
    std::string operator()(const ClientState& s) const { return s.outstanding.empty() ? "idle" : "waiting"; }
    template <class S>
    std::string operator()(const S& s) const {
        return s.mode == Mode::Idle ? "idle" : "processing";
    }
};

struct QueueOf {
    std::size_t operator()(const SinkState&) const { return 0; }
    std::size_t operator()(const DirectoryState&) const { return 0; }
    std::size_t operator()(const LeaderState& s) const { return s.backlog.size(); }
    std::size_t operator()(const ClientState& s) const { return s.outstanding.size(); }
    template <class S>
    std::size_t operator()(const S& s) const {
        return s.deferred.size();
    }
};

struct TimerOf {
    std::uint64_t id;
    Context& ctx;
    Actions operator()(LayerState& s) const { return layer_on_timer(s, id, ctx); }
    Actions operator()(FilterState& s) const { return filter_on_timer(s, id, ctx); }
    Actions operator()(ServiceState& s) const { return service_on_timer(s, id, ctx); }
    Actions operator()(LeaderState& s) const { return leader_on_timer(s, id, ctx); }
    Actions operator()(WorkerState& s) const { return worker_on_timer(s, id, ctx); }
    Actions operator()(PeerState& s) const { return peer_on_timer(s, id, ctx); }
    Actions operator()(ClientState& s) const { return client_tick(s, id, ctx); }
    Actions operator()(SinkState&) const { return {}; }
    Actions operator()(DirectoryState&) const { return {}; }
};

}  // namespace

std::string activity(const BehaviorState& state) { return std::visit(ActivityOf{}, state); }

std::size_t queue_length(const BehaviorState& state) { return std::visit(QueueOf{}, state); }

Actions on_start(BehaviorState& state, Context& ctx) {
    if (auto* l = std::get_if<LeaderState>(&state)) return leader_on_start(*l, ctx);
    if (auto* p = std::get_if<PeerState>(&state)) return peer_on_start(*p, ctx);
    if (auto* c = std::get_if<ClientState>(&state)) return client_on_start(*c, ctx);
    return {};
}

Actions on_message(BehaviorState& state, const Message& msg, ComponentId from, Context& ctx) {
    struct V {
        const Message& msg;
        ComponentId from;
        Context& ctx;
        Actions operator()(LayerState& s) const { return layer_on_message(s, msg, from, ctx); }
        Actions operator()(FilterState& s) const { return filter_on_message(s, msg, from, ctx); }
        Actions operator()(SinkState& s) const { return sink_on_message(s, msg, from, ctx); }
        Actions operator()(DirectoryState& s) const { return directory_on_message(s, msg, from, ctx); }
        Actions operator()(ServiceState& s) const { return service_on_message(s, msg, from, ctx); }
        Actions operator()(LeaderState& s) const { return leader_on_message(s, msg, from, ctx); }
        Actions operator()(WorkerState& s) const { return worker_on_message(s, msg, from, ctx); }
        Actions operator()(PeerState& s) const { return peer_on_message(s, msg, from, ctx); }
        Actions operator()(ClientState& s) const { return client_on_message(s, msg, from, ctx); }
    };
    return std::visit(V{msg, from, ctx}, state);
}

Actions on_timer(BehaviorState& state, std::uint64_t timer_id, Context& ctx) {
    if (timer::kind_of(timer_id) == timer::Kind::Start) return on_start(state, ctx);
    return std::visit(TimerOf{timer_id, ctx}, state);
}

}  // namespace archsim
