#include "test_support.hpp"

#include <cli.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace archsim;
using namespace archsim::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    Result r;
    r.code = archsim::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("archsim_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name), std::ios::binary) << text;
        return path(name);
    }
    std::string write_json(const std::string& name, const nlohmann::json& j) const { return write(name, j.dump(2)); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoArgumentsIsUsageError) {
    EXPECT_EQ(invoke({}).code, 1);
    EXPECT_EQ(invoke({"frobnicate"}).code, 1);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(Cli, ValidateAcceptsEveryFixture) {
    for (const auto& name : fixture_names()) {
        const auto r = invoke({"validate", fixture_path(name)});
        EXPECT_EQ(r.code, 0) << name << ": " << r.err;
        EXPECT_EQ(r.out.rfind("ok ", 0), 0u) << name;
    }
}

TEST_F(Cli, ValidateEmitIsCanonical) {
    const auto r = invoke({"validate", fixture_path("pipeline_4"), "--emit"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, emit_effective(fixture("pipeline_4")) + "\n");
}

TEST_F(Cli, SchemaProblemsExitTwo) {
    auto j = fixture_json("layered_chain");
    j["systems"][0]["layers"] = {"layer", "authz"};
    auto r = invoke({"validate", write_json("bad_ref.json", j)});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("authz"), std::string::npos);

    j = fixture_json("layered_chain");
    j["systems"][0]["stages"] = {"layer"};
    EXPECT_EQ(invoke({"validate", write_json("mismatch.json", j)}).code, 2);

    EXPECT_EQ(invoke({"validate", write("garbage.json", "{nope")}).code, 2);
}

TEST_F(Cli, MissingFileIsUsageError) { EXPECT_EQ(invoke({"validate", path("absent.json")}).code, 1); }

TEST_F(Cli, RunWritesTraceAndMetrics) {
    const auto r = invoke({"run", fixture_path("layered_chain"), "--duration-us", "3000000", "--trace", path("t.jsonl"),
                        "--metrics", path("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("style=layered"), std::string::npos);
    EXPECT_NE(r.out.find("throughput_rps="), std::string::npos);
    const auto trace = read_text(path("t.jsonl"));
    const auto recs = records_of(trace);
    ASSERT_FALSE(recs.empty());
    EXPECT_EQ(recs.back().type, "end");
    EXPECT_EQ(read_text(path("m.csv")).rfind("metric,component,value\n", 0), 0u);

    ASSERT_EQ(invoke({"run", fixture_path("layered_chain"), "--duration-us", "3000000", "--metrics", path("m.json"),
                   "--format", "json"})
                  .code,
              0);
    const auto m = nlohmann::json::parse(read_text(path("m.json")));
    EXPECT_GT(m["throughput_rps"].get<double>(), 30.0);
}

TEST_F(Cli, SeedOverrideChangesOnlyRandomScenarios) {
    const auto a = invoke({"run", fixture_path("layered_reuse"), "--seed", "1", "--trace", path("a.jsonl")});
    const auto b = invoke({"run", fixture_path("layered_reuse"), "--seed", "2", "--trace", path("b.jsonl")});
    const auto c = invoke({"run", fixture_path("layered_reuse"), "--seed", "1", "--trace", path("c.jsonl")});
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_NE(read_text(path("a.jsonl")), read_text(path("b.jsonl")));
    EXPECT_EQ(read_text(path("a.jsonl")), read_text(path("c.jsonl")));
}

TEST_F(Cli, CompareReportsRatio) {
    const auto r = invoke({"compare", fixture_path("pipeline_4"), fixture_path("layered_chain"), "--metric", "throughput_rps",
                        "--duration-us", "5000000"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::map<std::string, std::string> last;
    while (std::getline(lines, line)) last[line.substr(0, line.find(','))] = line.substr(line.rfind(',') + 1);
    ASSERT_TRUE(last.contains("ratio_a_over_b"));
    EXPECT_GT(std::stod(last["ratio_a_over_b"]), 2.5);
    EXPECT_EQ(invoke({"compare", fixture_path("pipeline_4"), fixture_path("layered_chain"), "--metric", "nope"}).code, 1);
}

TEST_F(Cli, ReplayOkAndDivergence) {
    ASSERT_EQ(invoke({"run", fixture_path("p2p_ttl"), "--duration-us", "2000000", "--trace", path("t.jsonl")}).code, 0);
    const auto ok = invoke({"replay", path("t.jsonl")});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(ok.out, "replay ok\n");

    auto text = read_text(path("t.jsonl"));
    // Flip one digit on a line well past the header.
    auto pos = text.find("\"t\":", text.size() / 2);
    ASSERT_NE(pos, std::string::npos);
    pos += 4;
    text[pos] = text[pos] == '9' ? '8' : static_cast<char>(text[pos] + 1);
    const auto bad = invoke({"replay", write("bad.jsonl", text)});
    EXPECT_EQ(bad.code, 4);
    EXPECT_NE(bad.err.find("diverged at line"), std::string::npos);

    EXPECT_EQ(invoke({"replay", write("empty.jsonl", "")}).code, 4);
}

TEST_F(Cli, ReuseAndImpactReports) {
    const auto reuse = invoke({"report", fixture_path("layered_reuse"), "reuse"});
    ASSERT_EQ(reuse.code, 0);
    EXPECT_NE(reuse.out.find("ui,layer,2,2"), std::string::npos) << reuse.out;

    const auto impact = invoke({"report", fixture_path("layered_chain"), "impact", "chain.layer1"});
    ASSERT_EQ(impact.code, 0) << impact.err;
    EXPECT_EQ(impact.out, "changed,chain.layer1\naffected,chain.layer0,chain.layer1,chain.layer2\n");

    EXPECT_EQ(invoke({"report", fixture_path("layered_chain"), "impact", "chain.nope"}).code, 1);
    EXPECT_EQ(invoke({"report", fixture_path("layered_chain"), "impact"}).code, 1);
}
