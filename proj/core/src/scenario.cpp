#include "archsim/scenario.hpp"

#include <fstream>
#include <sstream>

namespace archsim {

using nlohmann::json;

namespace {

const char* policy_name(DispatchPolicy p) {
    switch (p) {
        case DispatchPolicy::Random: return "random";
        case DispatchPolicy::RoundRobin: return "round_robin";
        case DispatchPolicy::LeastBusy: return "least_busy";
    }
    return "?";
}

const char* fanout_name(Fanout::Mode m) {
    switch (m) {
        case Fanout::Mode::Single: return "single";
        case Fanout::Mode::Replicate: return "replicate";
        case Fanout::Mode::Split: return "split";
    }
    return "?";
}

const char* fault_name(FaultKind k) {
    switch (k) {
        case FaultKind::Crash: return "crash";
        case FaultKind::Restart: return "restart";
        case FaultKind::SetSilentDrop: return "silent_drop";
    }
    return "?";
}

/// Strict reader over one JSON object: every key must be consumed, and each
/// failure reports the JSON path.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_.empty() ? "/" : path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return path_ + "/" + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        const auto it = j_.find(key);
        if (it == j_.end()) throw SchemaError(at(key), "required");
        used_.insert(key);
        return *it;
    }

    std::string str(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) throw SchemaError(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::string str(const std::string& key, std::string fallback) { return has(key) ? str(key) : fallback; }

    std::uint64_t u64(const std::string& key) {
        const auto& v = raw(key);
        if (!is_non_negative_integer(v)) throw SchemaError(at(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) { return has(key) ? u64(key) : fallback; }

    std::uint32_t u32(const std::string& key, std::uint32_t fallback) {
        if (!has(key)) return fallback;
        const auto v = u64(key);
        if (v > 0xFFFFFFFFULL) throw SchemaError(at(key), "out of range");
        return static_cast<std::uint32_t>(v);
    }
    std::uint32_t u32(const std::string& key) {
        const auto v = u64(key);
        if (v > 0xFFFFFFFFULL) throw SchemaError(at(key), "out of range");
        return static_cast<std::uint32_t>(v);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        return v.get<double>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw SchemaError(at(key), "expected a boolean");
        return v.get<bool>();
    }

    const json& array(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array");
        return v;
    }

    const json& object(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_object()) throw SchemaError(at(key), "expected an object");
        return v;
    }

    /// Throws on keys nobody asked for.
    void done() const {
        for (const auto& [key, _] : j_.items())
            if (!used_.contains(key)) throw SchemaError(at(key), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

Distribution read_distribution(const json& j, const std::string& path) {
    Obj o(j, path);
    const auto kind = o.str("kind");
    Distribution d;
    if (kind == "constant") {
        d = Distribution::constant(o.u64("micros"));
    } else if (kind == "exponential") {
        d = Distribution::exponential(o.u64("mean_micros"));
        if (d.micros == 0) throw SchemaError(o.at("mean_micros"), "must be > 0");
    } else {
        throw SchemaError(o.at("kind"), "expected 'constant' or 'exponential'");
    }
    o.done();
    return d;
}

Distribution dist_field(Obj& o, const std::string& key, Distribution fallback) {
    return o.has(key) ? read_distribution(o.raw(key), o.at(key)) : fallback;
}

ComponentSpec read_spec(const json& j, const std::string& path) {
    Obj o(j, path);
    const auto role = o.str("role");
    ComponentSpec spec;
    if (role == "layer") {
        LayerSpec s;
        s.proc_in = dist_field(o, "proc_in", Distribution::constant(0));
        s.proc_out = dist_field(o, "proc_out", Distribution::constant(0));
        s.downstream_timeout = o.u64("downstream_timeout_us", 0);
        spec = s;
    } else if (role == "filter") {
        spec = FilterSpec{dist_field(o, "proc", Distribution::constant(0))};
    } else if (role == "directory") {
        spec = DirectorySpec{dist_field(o, "route_delay", Distribution::constant(0))};
    } else if (role == "service") {
        spec = ServiceSpec{dist_field(o, "proc", Distribution::constant(0))};
    } else if (role == "worker") {
        spec = WorkerSpec{dist_field(o, "proc", Distribution::constant(0))};
    } else if (role == "leader") {
        LeaderConfig c;
        const auto policy = o.str("policy", "round_robin");
        if (policy == "random")
            c.policy = DispatchPolicy::Random;
        else if (policy == "round_robin")
            c.policy = DispatchPolicy::RoundRobin;
        else if (policy == "least_busy")
            c.policy = DispatchPolicy::LeastBusy;
        else
            throw SchemaError(o.at("policy"), "expected random, round_robin or least_busy");
        if (o.has("fanout")) {
            Obj f(o.object("fanout"), o.at("fanout"));
            const auto mode = f.str("mode", "single");
            if (mode == "single")
                c.fanout.mode = Fanout::Mode::Single;
            else if (mode == "replicate")
                c.fanout.mode = Fanout::Mode::Replicate;
            else if (mode == "split")
                c.fanout.mode = Fanout::Mode::Split;
            else
                throw SchemaError(f.at("mode"), "expected single, replicate or split");
            c.fanout.k = f.u32("k", 1);
            if (c.fanout.k < 1) throw SchemaError(f.at("k"), "must be >= 1");
            if (c.fanout.mode == Fanout::Mode::Single) c.fanout.k = 1;
            f.done();
        }
        c.min_workers = o.u32("min_workers", 1);
        c.max_workers = o.u32("max_workers", c.min_workers);
        c.idle_check_period = o.u64("idle_check_period_us", 0);
        c.idle_stop_threshold = o.u64("idle_stop_threshold_us", 0);
        c.spawn_delay = o.u64("spawn_delay_us", 0);
        c.dispatch_timeout = o.u64("dispatch_timeout_us", 0);
        if (c.min_workers < 1) throw SchemaError(o.at("min_workers"), "must be >= 1");
        if (c.max_workers < c.min_workers) throw SchemaError(o.at("max_workers"), "must be >= min_workers");
        spec = LeaderSpec{c};
    } else if (role == "peer") {
        PeerSpec s;
        s.proc = dist_field(o, "proc", Distribution::constant(0));
        s.forward_fanout = o.u32("forward_fanout", 1);
        if (s.forward_fanout < 1) throw SchemaError(o.at("forward_fanout"), "must be >= 1");
        s.maintenance_period = o.u64("maintenance_period_us", 0);
        s.churn = o.number("churn", 0.0);
        if (s.churn < 0.0 || s.churn > 1.0) throw SchemaError(o.at("churn"), "must be within [0, 1]");
        spec = s;
    } else {
        throw SchemaError(o.at("role"), "unknown role '" + role + "'");
    }
    o.done();
    return spec;
}

json spec_to_json(const ComponentSpec& spec) {
    struct V {
        json operator()(const LayerSpec& s) const {
            return {{"role", "layer"},
                    {"proc_in", to_json_value(s.proc_in)},
                    {"proc_out", to_json_value(s.proc_out)},
                    {"downstream_timeout_us", s.downstream_timeout}};
        }
        json operator()(const FilterSpec& s) const { return {{"role", "filter"}, {"proc", to_json_value(s.proc)}}; }
        json operator()(const DirectorySpec& s) const {
            return {{"role", "directory"}, {"route_delay", to_json_value(s.route_delay)}};
        }
        json operator()(const ServiceSpec& s) const { return {{"role", "service"}, {"proc", to_json_value(s.proc)}}; }
        json operator()(const WorkerSpec& s) const { return {{"role", "worker"}, {"proc", to_json_value(s.proc)}}; }
        json operator()(const LeaderSpec& s) const {
            const auto& c = s.cfg;
            return {{"role", "leader"},
                    {"policy", policy_name(c.policy)},
                    {"fanout", {{"mode", fanout_name(c.fanout.mode)}, {"k", c.fanout.k}}},
                    {"min_workers", c.min_workers},
                    {"max_workers", c.max_workers},
                    {"idle_check_period_us", c.idle_check_period},
                    {"idle_stop_threshold_us", c.idle_stop_threshold},
                    {"spawn_delay_us", c.spawn_delay},
                    {"dispatch_timeout_us", c.dispatch_timeout}};
        }
        json operator()(const PeerSpec& s) const {
            return {{"role", "peer"},
                    {"proc", to_json_value(s.proc)},
                    {"forward_fanout", s.forward_fanout},
                    {"maintenance_period_us", s.maintenance_period},
                    {"churn", s.churn}};
        }
    };
    return std::visit(V{}, spec);
}

// Keys owned by each style inside a system object.
const std::map<Style, std::set<std::string>>& style_keys() {
    static const std::map<Style, std::set<std::string>> keys{
        {Style::Layered, {"layers"}},
        {Style::Pipeline, {"stages", "replication"}},
        {Style::ClientServer, {"directories", "services"}},
        {Style::LeaderFollower, {"leader", "worker", "initial_workers"}},
        {Style::PeerToPeer, {"peer", "peers", "target_degree", "capabilities"}},
    };
    return keys;
}

void require_spec(const Scenario& s, const std::string& name, Role role, const std::string& path) {
    const auto it = s.spec_library.find(name);
    if (it == s.spec_library.end()) throw UnknownSpecReference(name);
    if (spec_role(it->second) != role)
        throw SchemaError(path, "spec '" + name + "' is a " + to_string(spec_role(it->second)) + ", expected " + to_string(role));
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path, "expected an array");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) throw SchemaError(path + "/" + std::to_string(i), "expected a string");
        out.push_back(j[i].get<std::string>());
    }
    return out;
}

std::uint32_t index_key(const std::string& key, const std::string& path) {
    if (key.empty() || key.size() > 9 || key.find_first_not_of("0123456789") != std::string::npos)
        throw SchemaError(path, "key must be a non-negative integer");
    return static_cast<std::uint32_t>(std::stoul(key));
}

SystemDecl read_system(const json& j, const std::string& path, Style style, const Scenario& s) {
    // Parameters of another style are a mismatch, not merely unknown fields.
    for (const auto& [other, keys] : style_keys()) {
        if (other == style) continue;
        for (const auto& key : keys)
            if (j.is_object() && j.contains(key) && !style_keys().at(style).contains(key))
                throw StyleParameterMismatch(path + "/" + key + ": " + to_string(other) + " parameter under style " +
                                             to_string(style));
    }
    Obj o(j, path);
    SystemDecl d;
    d.name = o.str("name");
    if (d.name.empty() || d.name.find('.') != std::string::npos)
        throw SchemaError(o.at("name"), "must be non-empty and contain no '.'");
    switch (style) {
        case Style::Layered:
            d.layers = string_list(o.array("layers"), o.at("layers"));
            for (std::size_t i = 0; i < d.layers.size(); ++i)
                require_spec(s, d.layers[i], Role::Layer, o.at("layers") + "/" + std::to_string(i));
            break;
        case Style::Pipeline:
            d.stages = string_list(o.array("stages"), o.at("stages"));
            for (std::size_t i = 0; i < d.stages.size(); ++i)
                require_spec(s, d.stages[i], Role::Filter, o.at("stages") + "/" + std::to_string(i));
            if (o.has("replication")) {
                for (const auto& [key, v] : o.object("replication").items()) {
                    const auto p = o.at("replication") + "/" + key;
                    if (!is_non_negative_integer(v)) throw SchemaError(p, "expected a non-negative integer");
                    d.replication[index_key(key, p)] = v.get<std::uint32_t>();
                }
            }
            break;
        case Style::ClientServer: {
            const auto& dirs = o.array("directories");
            for (std::size_t i = 0; i < dirs.size(); ++i) {
                Obj dj(dirs[i], o.at("directories") + "/" + std::to_string(i));
                SystemDecl::Directory dir;
                dir.spec = dj.str("spec");
                require_spec(s, dir.spec, Role::Directory, dj.at("spec"));
                dir.catalogue = string_list(dj.raw("catalogue"), dj.at("catalogue"));
                dj.done();
                d.directories.push_back(std::move(dir));
            }
            for (const auto& [name, v] : o.object("services").items()) {
                Obj sj(v, o.at("services") + "/" + name);
                SystemDecl::Service svc;
                svc.spec = sj.str("spec");
                require_spec(s, svc.spec, Role::Service, sj.at("spec"));
                svc.instances = sj.u32("instances", 1);
                sj.done();
                d.services[name] = std::move(svc);
            }
            break;
        }
        case Style::LeaderFollower:
            d.leader = o.str("leader");
            require_spec(s, d.leader, Role::Leader, o.at("leader"));
            d.worker = o.str("worker");
            require_spec(s, d.worker, Role::Worker, o.at("worker"));
            d.initial_workers = o.u32("initial_workers", 1);
            break;
        case Style::PeerToPeer:
            d.peer = o.str("peer");
            require_spec(s, d.peer, Role::Peer, o.at("peer"));
            d.peers = o.u32("peers");
            d.target_degree = o.u32("target_degree");
            if (o.has("capabilities")) {
                for (const auto& [key, v] : o.object("capabilities").items()) {
                    const auto p = o.at("capabilities") + "/" + key;
                    const auto list = string_list(v, p);
                    d.capabilities[index_key(key, p)] = std::set<std::string>(list.begin(), list.end());
                }
            }
            break;
    }
    o.done();
    return d;
}

json system_to_json(const SystemDecl& d, Style style) {
    json j{{"name", d.name}};
    switch (style) {
        case Style::Layered: j["layers"] = d.layers; break;
        case Style::Pipeline: {
            j["stages"] = d.stages;
            json rep = json::object();
            for (const auto& [stage, count] : d.replication) rep[std::to_string(stage)] = count;
            j["replication"] = rep;
            break;
        }
        case Style::ClientServer: {
            json dirs = json::array();
            for (const auto& dir : d.directories) dirs.push_back({{"spec", dir.spec}, {"catalogue", dir.catalogue}});
            j["directories"] = dirs;
            json svcs = json::object();
            for (const auto& [name, svc] : d.services) svcs[name] = {{"spec", svc.spec}, {"instances", svc.instances}};
            j["services"] = svcs;
            break;
        }
        case Style::LeaderFollower:
            j["leader"] = d.leader;
            j["worker"] = d.worker;
            j["initial_workers"] = d.initial_workers;
            break;
        case Style::PeerToPeer: {
            j["peer"] = d.peer;
            j["peers"] = d.peers;
            j["target_degree"] = d.target_degree;
            json caps = json::object();
            for (const auto& [idx, set] : d.capabilities) caps[std::to_string(idx)] = set;
            j["capabilities"] = caps;
            break;
        }
    }
    return j;
}

ClientGroup read_client_group(const json& j, const std::string& path, const Scenario& s) {
    Obj o(j, path);
    ClientGroup g;
    g.name = o.str("name");
    if (g.name.empty() || g.name.find('.') != std::string::npos)
        throw SchemaError(o.at("name"), "must be non-empty and contain no '.'");
    g.system = o.str("system", s.systems.empty() ? "" : s.systems.front().name);
    bool known = false;
    for (const auto& sys : s.systems) known = known || sys.name == g.system;
    if (!known) throw SchemaError(o.at("system"), "unknown system '" + g.system + "'");
    g.count = o.u32("count", 1);
    if (g.count < 1) throw SchemaError(o.at("count"), "must be >= 1");
    const auto loop = o.str("loop", "open");
    if (loop == "open")
        g.cfg.loop = LoopMode::Open;
    else if (loop == "closed")
        g.cfg.loop = LoopMode::Closed;
    else
        throw SchemaError(o.at("loop"), "expected 'open' or 'closed'");
    g.cfg.gap = read_distribution(o.raw("gap"), o.at("gap"));
    if (g.cfg.loop == LoopMode::Open && g.cfg.gap.micros == 0)
        throw SchemaError(o.at("gap"), "open-loop interarrival must be > 0");
    g.cfg.service = o.str("service", "default");
    g.cfg.timeout = o.u64("timeout_us", 0);
    g.cfg.max_attempts = o.u32("max_attempts", 1);
    if (g.cfg.max_attempts < 1) throw SchemaError(o.at("max_attempts"), "must be >= 1");
    if (o.has("ttl_hops") && !o.raw("ttl_hops").is_null()) {
        g.cfg.ttl_hops = o.u32("ttl_hops");
        if (*g.cfg.ttl_hops < 1) throw SchemaError(o.at("ttl_hops"), "must be >= 1 or null");
    }
    g.cfg.start = o.u64("start_us", 0);
    g.cfg.failure_grace = o.u64("failure_grace_us", 0);
    if (o.has("entry")) {
        const auto& e = o.array("entry");
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (!is_non_negative_integer(e[i])) throw SchemaError(o.at("entry") + "/" + std::to_string(i), "expected an index");
            g.entry.push_back(e[i].get<std::uint32_t>());
        }
    }
    o.done();
    return g;
}

json client_group_to_json(const ClientGroup& g) {
    return {{"name", g.name},
            {"system", g.system},
            {"count", g.count},
            {"loop", g.cfg.loop == LoopMode::Open ? "open" : "closed"},
            {"gap", to_json_value(g.cfg.gap)},
            {"service", g.cfg.service},
            {"timeout_us", g.cfg.timeout},
            {"max_attempts", g.cfg.max_attempts},
            {"ttl_hops", g.cfg.ttl_hops ? json(*g.cfg.ttl_hops) : json(nullptr)},
            {"start_us", g.cfg.start},
            {"failure_grace_us", g.cfg.failure_grace},
            {"entry", g.entry}};
}

std::vector<std::string> client_names(const ClientGroup& g) {
    std::vector<std::string> out;
    if (g.count == 1) {
        out.push_back(g.name);
    } else {
        for (std::uint32_t i = 0; i < g.count; ++i) out.push_back(g.name + std::to_string(i));
    }
    return out;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
    Obj o(j, "");
    Scenario s;
    s.version = o.str("version");
    if (s.version != "1") throw SchemaError("/version", "unsupported version '" + s.version + "'");
    s.seed = o.u64("seed", 0);
    s.duration = o.u64("duration_us");
    s.warmup = o.u64("warmup_us", 0);
    if (s.duration == 0 || s.duration <= s.warmup) throw SchemaError("/duration_us", "must be > warmup_us");
    const auto style_text = o.str("style");
    const auto style = style_from_string(style_text);
    if (!style) throw SchemaError("/style", "unknown style '" + style_text + "'");
    s.style = *style;

    for (const auto& [name, spec] : o.object("spec_library").items())
        s.spec_library[name] = read_spec(spec, "/spec_library/" + name);

    const auto& systems = o.array("systems");
    if (systems.empty()) throw SchemaError("/systems", "at least one system is required");
    std::set<std::string> system_names;
    for (std::size_t i = 0; i < systems.size(); ++i) {
        auto d = read_system(systems[i], "/systems/" + std::to_string(i), s.style, s);
        if (!system_names.insert(d.name).second)
            throw SchemaError("/systems/" + std::to_string(i) + "/name", "duplicate system '" + d.name + "'");
        s.systems.push_back(std::move(d));
    }

    const auto& workload = o.array("workload");
    std::set<std::string> group_names;
    for (std::size_t i = 0; i < workload.size(); ++i) {
        auto g = read_client_group(workload[i], "/workload/" + std::to_string(i), s);
        if (!group_names.insert(g.system + "." + g.name).second)
            throw SchemaError("/workload/" + std::to_string(i) + "/name", "duplicate client group '" + g.name + "'");
        s.workload.push_back(std::move(g));
    }

    if (o.has("faults")) {
        const auto& faults = o.array("faults");
        for (std::size_t i = 0; i < faults.size(); ++i) {
            Obj f(faults[i], "/faults/" + std::to_string(i));
            FaultEvent ev;
            ev.at = SimTime{f.u64("at_us")};
            ev.target = f.str("target");
            const auto kind = f.str("kind");
            if (kind == "crash")
                ev.kind = FaultKind::Crash;
            else if (kind == "restart")
                ev.kind = FaultKind::Restart;
            else if (kind == "silent_drop")
                ev.kind = FaultKind::SetSilentDrop;
            else
                throw SchemaError(f.at("kind"), "expected crash, restart or silent_drop");
            ev.on = f.boolean("on", true);
            f.done();
            s.faults.push_back(std::move(ev));
        }
    }

    if (o.has("commands")) {
        const auto& cmds = o.array("commands");
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            Obj c(cmds[i], "/commands/" + std::to_string(i));
            ScheduledCommand sc;
            sc.at = SimTime{c.u64("at_us")};
            try {
                sc.cmd = Command::from_json(c.raw("command"));
            } catch (const SchemaError&) {
                throw;
            } catch (const Error& e) {
                throw SchemaError(c.at("command"), e.what());
            }
            if (sc.cmd.session_only()) throw SchemaError(c.at("command") + "/type", "session-only command cannot be scheduled");
            c.done();
            s.commands.push_back(std::move(sc));
        }
    }

    s.link_latency = dist_field(o, "link_latency", Distribution::constant(0));
    if (o.has("pacing")) {
        Obj p(o.object("pacing"), "/pacing");
        const auto mode = p.str("mode", "batch");
        if (mode == "batch")
            s.pacing.mode = Pacing::Mode::Batch;
        else if (mode == "real_time")
            s.pacing.mode = Pacing::Mode::RealTime;
        else
            throw SchemaError("/pacing/mode", "expected 'batch' or 'real_time'");
        s.pacing.factor = p.number("factor", 1.0);
        if (s.pacing.factor <= 0.0) throw SchemaError("/pacing/factor", "must be > 0");
        p.done();
    }
    s.snapshot_period = o.u64("snapshot_period_us", 1'000'000);
    if (s.snapshot_period == 0) throw SchemaError("/snapshot_period_us", "must be > 0");
    o.done();

    // Structural checks need the built graph: builder errors and fault targets.
    std::vector<Topology> tops;
    try {
        tops = build_topologies(s);
    } catch (const TopologyError& e) {
        throw SchemaError("/systems", e.what());
    }
    std::set<std::string> names;
    for (const auto& t : tops)
        for (const auto& n : t.nodes)
            if (!names.insert(n.name).second) throw SchemaError("/workload", "duplicate component name '" + n.name + "'");
    for (std::size_t i = 0; i < s.faults.size(); ++i)
        if (!names.contains(s.faults[i].target))
            throw SchemaError("/faults/" + std::to_string(i) + "/target", "unknown component '" + s.faults[i].target + "'");
    return s;
}

Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("invalid JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

json to_json(const Scenario& s) {
    json lib = json::object();
    for (const auto& [name, spec] : s.spec_library) lib[name] = spec_to_json(spec);
    json systems = json::array();
    for (const auto& d : s.systems) systems.push_back(system_to_json(d, s.style));
    json workload = json::array();
    for (const auto& g : s.workload) workload.push_back(client_group_to_json(g));
    json faults = json::array();
    for (const auto& f : s.faults)
        faults.push_back({{"at_us", f.at.micros}, {"target", f.target}, {"kind", fault_name(f.kind)}, {"on", f.on}});
    json commands = json::array();
    for (const auto& c : s.commands) commands.push_back({{"at_us", c.at.micros}, {"command", c.cmd.to_json()}});
    return {{"version", s.version},
            {"seed", s.seed},
            {"duration_us", s.duration},
            {"warmup_us", s.warmup},
            {"style", to_string(s.style)},
            {"spec_library", lib},
            {"systems", systems},
            {"workload", workload},
            {"faults", faults},
            {"commands", commands},
            {"link_latency", to_json_value(s.link_latency)},
            {"pacing", {{"mode", s.pacing.mode == Pacing::Mode::Batch ? "batch" : "real_time"}, {"factor", s.pacing.factor}}},
            {"snapshot_period_us", s.snapshot_period}};
}

std::string emit_effective(const Scenario& s) { return to_json(s).dump(); }

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::vector<Topology> build_topologies(const Scenario& s) {
    auto named = [&](const std::string& name) {
        const auto it = s.spec_library.find(name);
        if (it == s.spec_library.end()) throw UnknownSpecReference(name);
        return NamedSpec{name, it->second};
    };
    std::vector<Topology> out;
    for (std::size_t i = 0; i < s.systems.size(); ++i) {
        const auto& d = s.systems[i];
        std::vector<ClientDecl> clients;
        for (const auto& g : s.workload) {
            if (g.system != d.name) continue;
            for (const auto& name : client_names(g)) {
                ClientDecl c{name, g.cfg, g.entry};
                c.cfg.return_path = s.style == Style::PeerToPeer;
                clients.push_back(std::move(c));
            }
        }
        switch (s.style) {
            case Style::Layered: {
                std::vector<NamedSpec> layers;
                for (const auto& l : d.layers) layers.push_back(named(l));
                out.push_back(build_layered(d.name, layers, clients));
                break;
            }
            case Style::Pipeline: {
                std::vector<NamedSpec> filters;
                for (const auto& f : d.stages) filters.push_back(named(f));
                out.push_back(build_pipeline(d.name, filters, d.replication, clients));
                break;
            }
            case Style::ClientServer: {
                std::vector<DirectoryDecl> dirs;
                for (const auto& dir : d.directories) dirs.push_back({named(dir.spec), dir.catalogue});
                std::map<std::string, ServiceDecl> svcs;
                for (const auto& [name, svc] : d.services) svcs[name] = ServiceDecl{named(svc.spec), svc.instances};
                out.push_back(build_client_server(d.name, clients, dirs, svcs));
                break;
            }
            case Style::LeaderFollower:
                out.push_back(build_leader_follower(d.name, clients, d.initial_workers, named(d.leader), named(d.worker)));
                break;
            case Style::PeerToPeer: {
                // Overlay chords come from a stream no component can own.
                Pcg32 rng = Pcg32::derive(s.seed, (std::uint64_t{1} << 32U) + i);
                out.push_back(build_p2p(d.name, d.peers, d.target_degree, named(d.peer), d.capabilities, clients, rng));
                break;
            }
        }
    }
    return out;
}

std::vector<ReuseEntry> reuse_report(const Scenario& s) {
    const auto tops = build_topologies(s);
    std::vector<ReuseEntry> out;
    for (const auto& [name, spec] : s.spec_library) {
        ReuseEntry e;
        e.spec = name;
        e.role = spec_role(spec);
        for (const auto& t : tops) {
            std::uint32_t here = 0;
            for (const auto& n : t.nodes)
                if (n.spec_ref == name) ++here;
            if (here > 0) ++e.systems;
            e.instances += here;
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace archsim
