#include "test_support.hpp"

#include <server.hpp>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <chrono>
#include <optional>
#include <thread>

using namespace archsim;
using namespace archsim::testing;
using nlohmann::json;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class ServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        server_ = std::make_unique<Server>(fixture("leader_elastic"), 1.0);
        server_->set_tick_ms(10);
        port_ = server_->listen("127.0.0.1", 0);
        thread_ = std::thread([this] { server_->run(); });
    }
    void TearDown() override {
        server_->stop();
        thread_.join();
    }

    std::pair<unsigned, std::string> get(const std::string& target) {
        net::io_context ioc;
        beast::tcp_stream stream(ioc);
        stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
        http::request<http::empty_body> req{http::verb::get, target, 11};
        req.set(http::field::host, "127.0.0.1");
        http::write(stream, req);
        beast::flat_buffer buf;
        http::response<http::string_body> res;
        http::read(stream, buf, res);
        return {static_cast<unsigned>(res.result_int()), res.body()};
    }

    std::unique_ptr<websocket::stream<tcp::socket>> open_ws(net::io_context& ioc) {
        auto ws = std::make_unique<websocket::stream<tcp::socket>>(ioc);
        ws->next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
        ws->handshake("127.0.0.1", "/ws");
        return ws;
    }

    static json read_frame(websocket::stream<tcp::socket>& ws) {
        beast::flat_buffer buf;
        ws.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }

    // Reads until a frame of `type` arrives (bounded).
    static json read_until(websocket::stream<tcp::socket>& ws, const std::string& type) {
        for (int i = 0; i < 1000; ++i) {
            auto f = read_frame(ws);
            if (f["type"] == type) return f;
        }
        return nullptr;
    }

    std::unique_ptr<Server> server_;
    unsigned short port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_F(ServerTest, ScenarioEndpointServesEffectiveScenario) {
    const auto [status, body] = get("/scenario");
    EXPECT_EQ(status, 200u);
    EXPECT_EQ(body, emit_effective(fixture("leader_elastic")));
}

TEST_F(ServerTest, SchemaEndpointsServeBothSchemas) {
    const auto [s1, scenario] = get("/schema");
    EXPECT_EQ(s1, 200u);
    EXPECT_EQ(json::parse(scenario), json::parse(read_text(std::string(ARCHSIM_SCENARIO_DIR) + "/../schema/scenario.schema.json")));
    const auto [s2, frames] = get("/schema/frames");
    EXPECT_EQ(s2, 200u);
    EXPECT_TRUE(json::parse(frames).is_object());
    EXPECT_EQ(get("/nothing").first, 404u);
}

TEST_F(ServerTest, WebSocketSessionSendsTopologyThenAcks) {
    net::io_context ioc;
    auto ws = open_ws(ioc);
    const auto first = read_frame(*ws);
    EXPECT_EQ(first["type"], "topology_snapshot");
    EXPECT_EQ(first["paused"], true);

    ws->write(net::buffer(json{{"type", "spawn_worker"}, {"id", 7}, {"leader", "pool.leader"}}.dump()));
    const auto ack = read_until(*ws, "ack");
    ASSERT_TRUE(ack.is_object());
    EXPECT_EQ(ack["id"], 7);

    ws->write(net::buffer(json{{"type", "crash"}, {"id", 8}, {"component", "pool.ghost"}}.dump()));
    const auto err = read_until(*ws, "error");
    ASSERT_TRUE(err.is_object());
    EXPECT_EQ(err["id"], 8);

    ws->write(net::buffer(std::string("{not json")));
    EXPECT_TRUE(read_until(*ws, "error").is_object());

    ws->write(net::buffer(json{{"type", "resume"}, {"id", 9}}.dump()));
    const auto batch = read_until(*ws, "trace_batch");
    ASSERT_TRUE(batch.is_object());
    EXPECT_FALSE(batch["lines"].empty());
    ws->close(websocket::close_code::normal);
}

TEST_F(ServerTest, SecondConcurrentSessionIsRefused) {
    net::io_context ioc;
    auto first = open_ws(ioc);
    EXPECT_EQ(read_frame(*first)["type"], "topology_snapshot");
    auto second = open_ws(ioc);
    const auto refused = read_frame(*second);
    EXPECT_EQ(refused["type"], "error");
    first->close(websocket::close_code::normal);
}

TEST_F(ServerTest, NextConnectionAfterCloseGetsAFreshEngine) {
    net::io_context ioc;
    {
        auto first = open_ws(ioc);
        read_frame(*first);
        first->write(net::buffer(json{{"type", "resume"}, {"id", 1}}.dump()));
        read_until(*first, "trace_batch");
        first->close(websocket::close_code::normal);
    }
    json fresh;
    for (int attempt = 0; attempt < 50; ++attempt) {
        auto again = open_ws(ioc);
        fresh = read_frame(*again);
        if (fresh["type"] == "topology_snapshot") {
            again->close(websocket::close_code::normal);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ASSERT_EQ(fresh["type"], "topology_snapshot");
    EXPECT_EQ(fresh["t"], 0);
}

TEST(ServerPacing, VirtualTimeTracksWallClockWithinTenPercent) {
    constexpr double kPace = 2.0;
    Server server(fixture("leader_elastic"), kPace);
    server.set_tick_ms(20);
    const auto port = server.listen("127.0.0.1", 0);
    std::thread runner([&] { server.run(); });

    net::io_context ioc;
    websocket::stream<tcp::socket> ws(ioc);
    ws.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws.handshake("127.0.0.1", "/ws");
    beast::flat_buffer buf;
    ws.read(buf);
    ws.write(net::buffer(json{{"type", "resume"}, {"id", 1}}.dump()));

    using clock = std::chrono::steady_clock;
    std::optional<std::pair<clock::time_point, std::uint64_t>> first;
    std::pair<clock::time_point, std::uint64_t> last;
    while (true) {
        buf.consume(buf.size());
        ws.read(buf);
        const auto f = json::parse(beast::buffers_to_string(buf.data()));
        if (f["type"] != "metrics_snapshot") continue;
        const auto now = clock::now();
        const auto t = f["t"].get<std::uint64_t>();
        if (!first) first = {now, t};
        last = {now, t};
        if (now - first->first >= std::chrono::milliseconds(5'200)) break;
    }
    ws.close(websocket::close_code::normal);
    server.stop();
    runner.join();

    const double wall = std::chrono::duration<double>(last.first - first->first).count();
    const double virt = static_cast<double>(last.second - first->second) / 1e6;
    EXPECT_GE(wall, 5.0);
    EXPECT_NEAR(virt / wall, kPace, kPace * 0.10) << virt << " virtual s over " << wall << " wall s";
}
