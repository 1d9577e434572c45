#pragma once

#include "archsim/trace.hpp"
#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace archsim {

enum class Outcome : std::uint8_t { Success, Failure, Timeout };

const char* to_string(Outcome outcome);

struct RequestRecord {
    std::uint64_t request_id = 0;
    std::string client;
    SimTime submitted_at;
    SimTime resolved_at;
    Outcome outcome = Outcome::Timeout;
    std::string reason;
    std::uint32_t hops = 0;
    std::uint32_t attempts = 1;
    bool resolved = false;
    bool censored = false;  // still alive at the horizon
};

struct BusyInterval {
    SimTime begin;
    SimTime end;
};

/// [from, to) in virtual time.
struct Window {
    SimTime from;
    SimTime to;
    Micros length() const { return to > from ? to - from : 0; }
};

/// Per-request outcome ledger plus per-component busy intervals, built from
/// trace records in order.
class Ledger {
public:
    void observe(const TraceRecord& rec);
    /// Closes the ledger at `horizon`: censors unresolved requests and clips open intervals.
    void finish(SimTime horizon);

    const std::map<std::uint64_t, RequestRecord>& requests() const { return requests_; }
    const std::map<std::string, std::vector<BusyInterval>>& busy() const { return busy_; }
    const std::set<std::string>& components() const { return components_; }
    std::optional<SimTime> horizon() const { return horizon_; }
    SimTime last_time() const { return last_t_; }

    std::uint64_t dup_discards() const { return dup_discards_; }
    std::uint64_t dup_suppressed() const { return dup_suppressed_; }
    std::uint64_t late_replies() const { return late_replies_; }
    std::uint64_t protocol_violations() const { return protocol_violations_; }
    std::uint64_t fault_rejections() const { return fault_rejections_; }
    /// Single-in-flight overlaps, double resolutions and other contract breaches seen so far.
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::map<std::uint64_t, RequestRecord> requests_;
    std::map<std::string, std::vector<BusyInterval>> busy_;
    std::map<std::string, std::map<std::string, SimTime>> open_;  // comp -> phase key -> begin
    std::set<std::string> components_;
    std::optional<SimTime> horizon_;
    SimTime last_t_;
    std::uint64_t dup_discards_ = 0;
    std::uint64_t dup_suppressed_ = 0;
    std::uint64_t late_replies_ = 0;
    std::uint64_t protocol_violations_ = 0;
    std::uint64_t fault_rejections_ = 0;
    std::vector<std::string> violations_;
    std::size_t lines_ = 0;
};

/// Builds a closed ledger from a whole trace. Throws MalformedTrace.
Ledger record(const std::vector<TraceRecord>& records);
Ledger record_text(std::string_view trace_text);

/// Successful resolutions per second inside the window.
double throughput(const Ledger& ledger, Window w);
/// Success / evaluable submissions in the window (censored requests excluded).
double availability(const Ledger& ledger, Window w);
/// Busy time / window length, intervals clipped at the window edges.
double utilization(const Ledger& ledger, std::string_view component, Window w);

struct MetricsReport {
    Window window;
    double throughput_rps = 0.0;
    Micros latency_p50 = 0;
    Micros latency_p95 = 0;
    Micros latency_max = 0;
    std::map<std::string, double> utilization;
    std::optional<double> availability;
    std::uint64_t max_in_flight = 0;
    std::uint64_t submitted = 0;
    std::uint64_t success = 0;
    std::uint64_t failure = 0;
    std::uint64_t timeout = 0;
    std::uint64_t censored = 0;
    std::map<std::string, std::uint64_t> failure_reasons;
    std::uint64_t dup_discards = 0;
    std::uint64_t dup_suppressed = 0;
};

MetricsReport make_report(const Ledger& ledger, Window w);
nlohmann::json to_json(const MetricsReport& r);
/// One row per metric: metric,component,value.
std::string to_csv(const MetricsReport& r);

/// Nearest-rank percentile of an ascending list; 0 for an empty list.
Micros nearest_rank(const std::vector<Micros>& sorted, double pct);

/// Whole-run contract checks over a closed ledger.
std::vector<std::string> check_invariants(const Ledger& ledger);

}  // namespace archsim
