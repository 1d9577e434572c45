#include "archsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace archsim {

const char* to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Success: return "success";
        case Outcome::Failure: return "failure";
        case Outcome::Timeout: return "timeout";
    }
    return "?";
}

namespace {

std::optional<Outcome> outcome_from(const std::string& text) {
    for (Outcome o : {Outcome::Success, Outcome::Failure, Outcome::Timeout})
        if (text == to_string(o)) return o;
    return std::nullopt;
}

bool in_window(SimTime t, Window w) { return t >= w.from && t < w.to; }

/// When the request stopped being in flight; open-ended while the ledger is still live.
SimTime end_of(const RequestRecord& r) {
    return r.resolved || r.censored ? r.resolved_at : SimTime{std::numeric_limits<Micros>::max()};
}

}  // namespace

void Ledger::observe(const TraceRecord& rec) {
    ++lines_;
    if (rec.t < last_t_)
        violations_.push_back("line " + std::to_string(lines_) + ": time went backwards");
    last_t_ = rec.t;
    const std::string& type = rec.type;
    if (rec.comp != "kernel") components_.insert(rec.comp);

    if (type == "submit") {
        const auto rid = static_cast<std::uint64_t>(rec.integer("rid"));
        if (requests_.contains(rid)) {
            violations_.push_back("request " + std::to_string(rid) + " submitted twice");
            return;
        }
        RequestRecord r;
        r.request_id = rid;
        r.client = rec.comp;
        r.submitted_at = rec.t;
        requests_[rid] = r;
    } else if (type == "resolve") {
        const auto rid = static_cast<std::uint64_t>(rec.integer("rid"));
        const auto it = requests_.find(rid);
        if (it == requests_.end()) {
            violations_.push_back("request " + std::to_string(rid) + " resolved without submission");
            return;
        }
        RequestRecord& r = it->second;
        if (r.resolved) {
            violations_.push_back("request " + std::to_string(rid) + " resolved twice");
            return;
        }
        const auto outcome = outcome_from(rec.text("outcome"));
        if (!outcome) throw MalformedTrace(lines_, "unknown outcome");
        r.outcome = *outcome;
        r.resolved = true;
        r.resolved_at = rec.t;
        if (rec.has("reason")) r.reason = rec.text("reason");
        if (rec.has("hops")) r.hops = static_cast<std::uint32_t>(rec.integer("hops"));
        if (rec.has("attempts")) r.attempts = static_cast<std::uint32_t>(rec.integer("attempts"));
    } else if (type == "begin") {
        auto& open = open_[rec.comp];
        if (!open.empty())
            violations_.push_back("line " + std::to_string(lines_) + ": " + rec.comp + " began work while busy");
        const std::string key = rec.has("phase") ? rec.text("phase") : "";
        open[key] = rec.t;
    } else if (type == "end" && rec.comp != "kernel") {
        auto& open = open_[rec.comp];
        const std::string key = rec.has("phase") ? rec.text("phase") : "";
        const auto it = open.find(key);
        if (it == open.end()) {
            violations_.push_back("line " + std::to_string(lines_) + ": " + rec.comp + " ended work it never began");
            return;
        }
        busy_[rec.comp].push_back({it->second, rec.t});
        open.erase(it);
    } else if (type == "crash" || type == "stop") {
        // Work in progress is lost; the component was busy until it went away.
        auto& open = open_[rec.comp];
        for (const auto& [_, begin] : open) busy_[rec.comp].push_back({begin, rec.t});
        open.clear();
    } else if (type == "dup_discard") {
        ++dup_discards_;
    } else if (type == "dup_suppressed") {
        ++dup_suppressed_;
    } else if (type == "late_reply") {
        ++late_replies_;
    } else if (type == "protocol_violation") {
        ++protocol_violations_;
    } else if (type == "fault_rejected") {
        ++fault_rejections_;
    }
}

void Ledger::finish(SimTime horizon) {
    horizon_ = horizon;
    for (auto& [_, r] : requests_) {
        if (r.resolved) continue;
        r.censored = true;
        r.outcome = Outcome::Timeout;
        r.resolved_at = std::max(horizon, r.submitted_at);
    }
    for (auto& [comp, open] : open_) {
        for (const auto& [_, begin] : open) busy_[comp].push_back({begin, std::max(horizon, begin)});
        open.clear();
    }
}

Ledger record(const std::vector<TraceRecord>& records) {
    Ledger l;
    std::optional<SimTime> end;
    for (const auto& r : records) {
        l.observe(r);
        if (r.type == "end" && r.comp == "kernel") end = r.t;
    }
    l.finish(end.value_or(l.last_time()));
    return l;
}

Ledger record_text(std::string_view trace_text) { return record(parse_trace(trace_text)); }

double throughput(const Ledger& ledger, Window w) {
    if (w.length() == 0) throw EmptyWindow("throughput over an empty window");
    std::uint64_t n = 0;
    for (const auto& [_, r] : ledger.requests())
        if (r.resolved && r.outcome == Outcome::Success && in_window(r.resolved_at, w)) ++n;
    return static_cast<double>(n) / (static_cast<double>(w.length()) / 1e6);
}

double availability(const Ledger& ledger, Window w) {
    if (w.length() == 0) throw EmptyWindow("availability over an empty window");
    std::uint64_t evaluable = 0;
    std::uint64_t ok = 0;
    for (const auto& [_, r] : ledger.requests()) {
        if (!r.resolved || !in_window(r.submitted_at, w)) continue;
        ++evaluable;
        if (r.outcome == Outcome::Success) ++ok;
    }
    if (evaluable == 0) throw EmptyWindow("no evaluable submissions in window");
    return static_cast<double>(ok) / static_cast<double>(evaluable);
}

double utilization(const Ledger& ledger, std::string_view component, Window w) {
    if (w.length() == 0) throw EmptyWindow("utilization over an empty window");
    const std::string name(component);
    if (!ledger.components().contains(name)) throw UnknownComponent(name);
    const auto it = ledger.busy().find(name);
    if (it == ledger.busy().end()) return 0.0;
    Micros busy = 0;
    for (const auto& b : it->second) {
        const SimTime from = std::max(b.begin, w.from);
        const SimTime to = std::min(b.end, w.to);
        if (to > from) busy += to - from;
    }
    return static_cast<double>(busy) / static_cast<double>(w.length());
}

Micros nearest_rank(const std::vector<Micros>& sorted, double pct) {
    if (sorted.empty()) return 0;
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

MetricsReport make_report(const Ledger& ledger, Window w) {
    MetricsReport r;
    r.window = w;
    if (w.length() == 0) throw EmptyWindow("report over an empty window");
    r.throughput_rps = throughput(ledger, w);

    std::vector<Micros> latencies;
    std::vector<std::pair<SimTime, int>> deltas;
    std::int64_t in_flight_at_start = 0;
    for (const auto& [_, q] : ledger.requests()) {
        if (q.resolved && q.outcome == Outcome::Success && in_window(q.resolved_at, w))
            latencies.push_back(q.resolved_at - q.submitted_at);
        const SimTime end = end_of(q);
        if (q.submitted_at < w.from && end > w.from) ++in_flight_at_start;
        if (in_window(q.submitted_at, w)) deltas.push_back({q.submitted_at, +1});
        if (end >= w.from && end < w.to && q.submitted_at < end) deltas.push_back({end, -1});

        if (!in_window(q.submitted_at, w)) continue;
        ++r.submitted;
        if (!q.resolved) {
            ++r.censored;
            continue;
        }
        switch (q.outcome) {
            case Outcome::Success: ++r.success; break;
            case Outcome::Failure:
                ++r.failure;
                ++r.failure_reasons[q.reason];
                break;
            case Outcome::Timeout: ++r.timeout; break;
        }
    }
    std::sort(latencies.begin(), latencies.end());
    r.latency_p50 = nearest_rank(latencies, 50);
    r.latency_p95 = nearest_rank(latencies, 95);
    r.latency_max = latencies.empty() ? 0 : latencies.back();

    // Resolutions before submissions at the same instant, so zero-length requests never count.
    std::sort(deltas.begin(), deltas.end());
    std::int64_t cur = in_flight_at_start;
    std::int64_t peak = cur;
    for (const auto& [_, d] : deltas) {
        cur += d;
        peak = std::max(peak, cur);
    }
    r.max_in_flight = static_cast<std::uint64_t>(std::max<std::int64_t>(peak, 0));

    for (const auto& [comp, _] : ledger.busy()) r.utilization[comp] = utilization(ledger, comp, w);
    try {
        r.availability = availability(ledger, w);
    } catch (const EmptyWindow&) {
        r.availability.reset();
    }
    r.dup_discards = ledger.dup_discards();
    r.dup_suppressed = ledger.dup_suppressed();
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json util = nlohmann::json::object();
    for (const auto& [c, u] : r.utilization) util[c] = u;
    nlohmann::json reasons = nlohmann::json::object();
    for (const auto& [k, n] : r.failure_reasons) reasons[k] = n;
    return {{"window", {{"from_us", r.window.from.micros}, {"to_us", r.window.to.micros}}},
            {"throughput_rps", r.throughput_rps},
            {"latency_p50_us", r.latency_p50},
            {"latency_p95_us", r.latency_p95},
            {"latency_max_us", r.latency_max},
            {"utilization", util},
            {"availability", r.availability ? nlohmann::json(*r.availability) : nlohmann::json(nullptr)},
            {"max_in_flight", r.max_in_flight},
            {"counts",
             {{"submitted", r.submitted},
              {"success", r.success},
              {"failure", r.failure},
              {"timeout", r.timeout},
              {"censored", r.censored}}},
            {"failure_reasons", reasons},
            {"dup_discards", r.dup_discards},
            {"dup_suppressed", r.dup_suppressed}};
}

std::string to_csv(const MetricsReport& r) {
    std::ostringstream out;
    out.precision(10);
    out << "metric,component,value\n";
    out << "window_from_us,," << r.window.from.micros << "\n";
    out << "window_to_us,," << r.window.to.micros << "\n";
    out << "throughput_rps,," << r.throughput_rps << "\n";
    out << "latency_p50_us,," << r.latency_p50 << "\n";
    out << "latency_p95_us,," << r.latency_p95 << "\n";
    out << "latency_max_us,," << r.latency_max << "\n";
    out << "availability,,";
    if (r.availability) out << *r.availability;
    out << "\n";
    out << "max_in_flight,," << r.max_in_flight << "\n";
    out << "submitted,," << r.submitted << "\n";
    out << "success,," << r.success << "\n";
    out << "failure,," << r.failure << "\n";
    out << "timeout,," << r.timeout << "\n";
    out << "censored,," << r.censored << "\n";
    out << "dup_discards,," << r.dup_discards << "\n";
    out << "dup_suppressed,," << r.dup_suppressed << "\n";
    for (const auto& [reason, n] : r.failure_reasons) out << "failure_reason," << reason << "," << n << "\n";
    for (const auto& [comp, u] : r.utilization) out << "utilization," << comp << "," << u << "\n";
    return out.str();
}

std::vector<std::string> check_invariants(const Ledger& ledger) {
    std::vector<std::string> out = ledger.violations();
    for (const auto& [rid, r] : ledger.requests()) {
        if (r.resolved == r.censored)
            out.push_back("request " + std::to_string(rid) + " is neither resolved nor censored");
        if (r.resolved_at < r.submitted_at)
            out.push_back("request " + std::to_string(rid) + " resolved before submission");
    }
    for (const auto& [comp, intervals] : ledger.busy()) {
        for (std::size_t i = 1; i < intervals.size(); ++i)
            if (intervals[i].begin < intervals[i - 1].end)
                out.push_back(comp + " has overlapping busy intervals");
    }
    return out;
}

}  // namespace archsim
