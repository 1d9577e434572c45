#pragma once

#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace archsim {

/// One trace line. Serialized with the fixed key order t, seq, type, comp and
/// then the payload keys sorted alphabetically; this byte layout is the
/// determinism contract.
struct TraceRecord {
    SimTime t;
    std::uint64_t seq = 0;
    std::string type;
    std::string comp;
    nlohmann::json fields = nlohmann::json::object();

    std::string to_line() const;
    static TraceRecord parse(std::string_view line, std::size_t line_no = 0);

    bool has(const char* key) const { return fields.contains(key); }
    std::int64_t integer(const char* key) const;
    std::string text(const char* key) const;
};

/// Append-only trace sink owned by an engine. Lines go to line sinks,
/// structured records to observers (the metrics ledger listens here).
class TraceSink {
public:
    using LineSink = std::function<void(const std::string&)>;
    using RecordObserver = std::function<void(const TraceRecord&)>;

    void add_line_sink(LineSink sink) { line_sinks_.push_back(std::move(sink)); }
    void add_observer(RecordObserver obs) { observers_.push_back(std::move(obs)); }

    void emit(const TraceRecord& rec);
    std::uint64_t count() const { return count_; }

private:
    std::vector<LineSink> line_sinks_;
    std::vector<RecordObserver> observers_;
    std::uint64_t count_ = 0;
};

/// Reads a JSON-lines trace, calling `fn` for every record in order.
void for_each_record(std::istream& in, const std::function<void(const TraceRecord&)>& fn);
std::vector<TraceRecord> parse_trace(std::string_view text);

}  // namespace archsim
