#include "cli.hpp"

#include "server.hpp"

#include <archsim/metrics.hpp>
#include <archsim/scenario.hpp>
#include <archsim/simulation.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace archsim::cli {
namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw std::ios_base::failure("cannot write " + path);
}

struct RunFlags {
    std::optional<std::uint64_t> seed;
    std::optional<Micros> duration;
};

Simulation::Overrides overrides_of(const RunFlags& f) { return {f.seed, f.duration}; }

Window measurement_window(const Scenario& s) { return Window{SimTime{s.warmup}, SimTime{s.duration}}; }

struct Measured {
    Scenario effective;
    RunOutput out;
    MetricsReport report;
};

Measured measure(const Scenario& scenario, const RunFlags& flags) {
    Measured m;
    m.out = run_scenario(scenario, overrides_of(flags));
    m.effective = parse_scenario(m.out.effective_scenario);
    m.report = make_report(m.out.ledger, measurement_window(m.effective));
    return m;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

int cmd_run(const std::string& path, const RunFlags& flags, const std::string& trace_path,
            const std::string& metrics_path, const std::string& format, std::ostream& out, std::ostream& err) {
    const Measured m = measure(load_scenario_file(path), flags);
    if (!trace_path.empty()) write_file(trace_path, m.out.trace);
    if (!metrics_path.empty()) write_file(metrics_path, format == "json" ? to_json(m.report).dump(2) + "\n" : to_csv(m.report));

    const auto& r = m.report;
    out << "run style=" << to_string(m.effective.style) << " seed=" << m.effective.seed << " events=" << m.out.events
        << " submitted=" << r.submitted << " success=" << r.success << " failure=" << r.failure
        << " timeout=" << r.timeout << " censored=" << r.censored << " throughput_rps=" << fixed(r.throughput_rps, 3)
        << " availability=" << (r.availability ? fixed(*r.availability, 4) : "n/a") << "\n";

    const auto violations = check_invariants(m.out.ledger);
    for (const auto& v : violations) err << "invariant violated: " << v << "\n";
    return violations.empty() ? kOk : kInvariant;
}

int cmd_validate(const std::string& path, bool emit, std::ostream& out) {
    const Scenario s = load_scenario_file(path);
    if (emit)
        out << emit_effective(s) << "\n";
    else
        out << "ok " << to_string(s.style) << " systems=" << s.systems.size() << " clients=" << s.workload.size() << "\n";
    return kOk;
}

double metric_of(const MetricsReport& r, const std::string& metric) {
    if (metric == "throughput_rps") return r.throughput_rps;
    if (metric == "latency_p50_us") return static_cast<double>(r.latency_p50);
    if (metric == "latency_p95_us") return static_cast<double>(r.latency_p95);
    if (metric == "latency_max_us") return static_cast<double>(r.latency_max);
    if (metric == "max_in_flight") return static_cast<double>(r.max_in_flight);
    if (metric == "availability") return r.availability.value_or(0.0);
    throw CLI::ValidationError("--metric", "unknown metric '" + metric + "'");
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& metric, const RunFlags& flags,
                std::ostream& out) {
    const Scenario sa = load_scenario_file(a);
    const Scenario sb = load_scenario_file(b);
    RunFlags fa = flags;
    RunFlags fb = flags;
    // Same seed for both sides; without --seed, B runs with A's seed.
    if (!fb.seed) fb.seed = sa.seed;
    auto ra = std::async(std::launch::async, [&] { return measure(sa, fa); });
    auto rb = std::async(std::launch::async, [&] { return measure(sb, fb); });
    const Measured ma = ra.get();
    const Measured mb = rb.get();
    const double va = metric_of(ma.report, metric);
    const double vb = metric_of(mb.report, metric);
    out << "metric," << metric << "\n";
    out << "a," << a << "," << fixed(va, 6) << "\n";
    out << "b," << b << "," << fixed(vb, 6) << "\n";
    out << "ratio_a_over_b," << (vb == 0.0 ? std::string("inf") : fixed(va / vb, 6)) << "\n";
    return kOk;
}

int cmd_replay(const std::string& path, std::ostream& out, std::ostream& err) {
    const std::string text = read_file(path);
    try {
        replay_trace(text);
    } catch (const ReplayDivergence& e) {
        err << "replay diverged at line " << e.line() << "\n";
        return kDivergence;
    } catch (const MalformedTrace& e) {
        err << "cannot replay: " << e.what() << "\n";
        return kDivergence;
    }
    out << "replay ok\n";
    return kOk;
}

int cmd_report(const std::string& path, const std::string& kind, const std::string& component, std::ostream& out) {
    const Scenario s = load_scenario_file(path);
    if (kind == "reuse") {
        out << "spec,role,systems,instances\n";
        for (const auto& e : reuse_report(s))
            out << e.spec << "," << to_string(e.role) << "," << e.systems << "," << e.instances << "\n";
        return kOk;
    }
    if (component.empty()) throw CLI::ValidationError("impact", "needs a component name");
    for (const auto& t : build_topologies(s)) {
        if (!t.find(component)) continue;
        const ImpactSet impact = change_impact(t, component);
        out << "changed," << t.nodes[impact.changed].name << "\n";
        out << "affected";
        for (std::uint32_t n : impact.affected) out << "," << t.nodes[n].name;
        out << "\n";
        return kOk;
    }
    throw UnknownComponent(component);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deterministic simulator of five architectural styles", "archsim"};
    app.require_subcommand(1);

    RunFlags flags;
    std::string scenario_path;
    std::string trace_path;
    std::string metrics_path;
    std::string format = "csv";
    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--seed", flags.seed, "Master seed (overrides the file)");
        sub->add_option("--duration-us", flags.duration, "Run length in virtual microseconds")->check(CLI::PositiveNumber);
    };

    auto* run_cmd = app.add_subcommand("run", "Run a scenario to its horizon");
    run_cmd->add_option("scenario", scenario_path)->required();
    run_cmd->add_option("--trace", trace_path, "Write the JSON-lines trace here");
    run_cmd->add_option("--metrics", metrics_path, "Write the metrics report here");
    run_cmd->add_option("--format", format, "Metrics format")->check(CLI::IsMember({"csv", "json"}));
    add_overrides(run_cmd);

    bool emit = false;
    auto* validate_cmd = app.add_subcommand("validate", "Parse and validate a scenario");
    validate_cmd->add_option("scenario", scenario_path)->required();
    validate_cmd->add_flag("--emit", emit, "Print the effective canonical scenario");

    std::string other_path;
    std::string metric = "throughput_rps";
    auto* compare_cmd = app.add_subcommand("compare", "Run two scenarios with one seed and compare a metric");
    compare_cmd->add_option("a", scenario_path)->required();
    compare_cmd->add_option("b", other_path)->required();
    compare_cmd->add_option("--metric", metric, "throughput_rps, latency_p50_us, latency_p95_us, latency_max_us, "
                                                "max_in_flight or availability");
    add_overrides(compare_cmd);

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "Re-execute a trace and check it regenerates byte for byte");
    replay_cmd->add_option("trace", replay_path)->required();

    std::string kind;
    std::string component;
    auto* report_cmd = app.add_subcommand("report", "Reuse or change-impact report");
    report_cmd->add_option("scenario", scenario_path)->required();
    report_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"reuse", "impact"}));
    report_cmd->add_option("component", component, "Component for the impact report");

    unsigned short port = 8080;
    std::optional<double> pace;
    std::string bind = "127.0.0.1";
    auto* serve_cmd = app.add_subcommand("serve", "Interactive session over WebSocket at /ws");
    serve_cmd->add_option("scenario", scenario_path)->required();
    serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)");
    serve_cmd->add_option("--pace", pace, "Virtual seconds per wall second")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--bind", bind, "Listen address");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(scenario_path, flags, trace_path, metrics_path, format, out, err);
        if (*validate_cmd) return cmd_validate(scenario_path, emit, out);
        if (*compare_cmd) return cmd_compare(scenario_path, other_path, metric, flags, out);
        if (*replay_cmd) return cmd_replay(replay_path, out, err);
        if (*report_cmd) return cmd_report(scenario_path, kind, component, out);
        if (*serve_cmd) {
            const Scenario s = load_scenario_file(scenario_path);
            const double p = pace.value_or(s.pacing.mode == Pacing::Mode::RealTime ? s.pacing.factor : 1.0);
            return serve(s, bind, port, p, out, err);
        }
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return kSchema;
    } catch (const UnknownSpecReference& e) {
        err << "schema error: " << e.what() << "\n";
        return kSchema;
    } catch (const StyleParameterMismatch& e) {
        err << "schema error: " << e.what() << "\n";
        return kSchema;
    } catch (const UnknownComponent& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::ios_base::failure& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        // Scenario files that cannot be opened surface as plain errors.
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace archsim::cli
