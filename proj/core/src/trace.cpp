#include "archsim/trace.hpp"

#include <sstream>

namespace archsim {

std::string TraceRecord::to_line() const {
    std::string out;
    out.reserve(96);
    out += "{\"t\":";
    out += std::to_string(t.micros);
    out += ",\"seq\":";
    out += std::to_string(seq);
    out += ",\"type\":";
    out += nlohmann::json(type).dump();
    out += ",\"comp\":";
    out += nlohmann::json(comp).dump();
    // nlohmann::json objects iterate in key order.
    for (const auto& [key, value] : fields.items()) {
        out += ',';
        out += nlohmann::json(key).dump();
        out += ':';
        out += value.dump();
    }
    out += '}';
    return out;
}

TraceRecord TraceRecord::parse(std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedTrace(line_no, e.what());
    }
    if (!j.is_object()) throw MalformedTrace(line_no, "not an object");
    for (const char* key : {"t", "seq"}) {
        if (!j.contains(key) || !j[key].is_number_unsigned())
            throw MalformedTrace(line_no, std::string("missing integer '") + key + "'");
    }
    for (const char* key : {"type", "comp"}) {
        if (!j.contains(key) || !j[key].is_string())
            throw MalformedTrace(line_no, std::string("missing string '") + key + "'");
    }
    TraceRecord rec;
    rec.t = SimTime{j["t"].get<std::uint64_t>()};
    rec.seq = j["seq"].get<std::uint64_t>();
    rec.type = j["type"].get<std::string>();
    rec.comp = j["comp"].get<std::string>();
    j.erase("t");
    j.erase("seq");
    j.erase("type");
    j.erase("comp");
    rec.fields = std::move(j);
    return rec;
}

std::int64_t TraceRecord::integer(const char* key) const {
    const auto it = fields.find(key);
    if (it == fields.end() || !it->is_number_integer())
        throw MalformedTrace(0, type + " record without integer '" + key + "'");
    return it->get<std::int64_t>();
}

std::string TraceRecord::text(const char* key) const {
    const auto it = fields.find(key);
    if (it == fields.end() || !it->is_string()) throw MalformedTrace(0, type + " record without string '" + key + "'");
    return it->get<std::string>();
}

void TraceSink::emit(const TraceRecord& rec) {
    ++count_;
    if (!line_sinks_.empty()) {
        const std::string line = rec.to_line();
        for (auto& sink : line_sinks_) sink(line);
    }
    for (auto& obs : observers_) obs(rec);
}

void for_each_record(std::istream& in, const std::function<void(const TraceRecord&)>& fn) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        fn(TraceRecord::parse(line, n));
    }
}

std::vector<TraceRecord> parse_trace(std::string_view text) {
    std::vector<TraceRecord> out;
    std::istringstream in{std::string(text)};
    for_each_record(in, [&](const TraceRecord& r) { out.push_back(r); });
    return out;
}

}  // namespace archsim
