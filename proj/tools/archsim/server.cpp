#include "server.hpp"

#include "schemas.hpp"

#include <archsim/session.hpp>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <fstream>
#include <ostream>

namespace archsim {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

const std::string& scenario_schema_text() {
    static const std::string text = schemas::kScenario;
    return text;
}

const std::string& frames_schema_text() {
    static const std::string text = schemas::kFrames;
    return text;
}

struct Server::Impl {
    Scenario scenario;
    double pace;
    std::string effective;
    unsigned tick_ms = 50;
    // Engine for the next (or current) session; replaced once its session ends.
    std::shared_ptr<Simulation> sim;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};

    Impl(Scenario s, double p) : scenario(std::move(s)), pace(p), effective(emit_effective(scenario)) {}

    std::shared_ptr<Simulation> engine() {
        if (!sim) sim = std::make_shared<Simulation>(scenario);
        return sim;
    }
    void retire(const std::shared_ptr<Simulation>& used) {
        if (sim == used) sim.reset();
    }
    void accept();
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, Server::Impl& srv)
        : ws_(std::move(socket)), srv_(srv), timer_(ws_.get_executor()), queue_(512) {}

    void start(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        try {
            engine_ = srv_.engine();
            session_ = std::make_unique<Session>(engine_, srv_.pace);
        } catch (const SessionRefused& e) {
            engine_.reset();
            queue_.push(error_frame(0, e.what()));
            closing_ = true;
            flush();
            return;
        }
        queue_.push(session_->initial_frame());
        flush();
        read();
        last_ = std::chrono::steady_clock::now();
        schedule_tick();
    }

    void read() {
        ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            finish();
            return;
        }
        const std::string text = beast::buffers_to_string(in_.data());
        in_.consume(in_.size());
        std::uint64_t id = 0;
        try {
            const json j = json::parse(text);
            if (j.is_object() && j.contains("id") && is_non_negative_integer(j["id"])) id = j["id"].get<std::uint64_t>();
            if (session_) session_->submit(Command::from_json(j));
        } catch (const std::exception& e) {
            queue_.push(error_frame(id, e.what()));
            flush();
        }
        read();
    }

    void schedule_tick() {
        timer_.expires_after(std::chrono::milliseconds(srv_.tick_ms));
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
    }

    void on_tick(beast::error_code ec) {
        if (ec || !session_) return;
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        for (auto& f : session_->tick(elapsed)) queue_.push(std::move(f));
        if (session_->at_horizon()) {
            closing_ = true;
            flush();
            return;
        }
        flush();
        schedule_tick();
    }

    void flush() {
        if (writing_) return;
        if (queue_.empty()) {
            if (closing_ && !closed_) {
                closed_ = true;
                ws_.async_close(websocket::close_code::normal,
                                [self = shared_from_this()](beast::error_code) { self->finish(); });
            }
            return;
        }
        writing_ = true;
        out_ = queue_.pop().dump();
        ws_.text(true);
        ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) {
                self->finish();
                return;
            }
            self->flush();
        });
    }

    void finish() {
        timer_.cancel();
        if (session_) {
            session_.reset();
            srv_.retire(engine_);
        }
        engine_.reset();
    }

    websocket::stream<beast::tcp_stream> ws_;
    Server::Impl& srv_;
    net::steady_timer timer_;
    beast::flat_buffer in_;
    FrameQueue queue_;
    std::string out_;
    bool writing_ = false;
    bool closing_ = false;
    bool closed_ = false;
    std::shared_ptr<Simulation> engine_;
    std::unique_ptr<Session> session_;
    std::chrono::steady_clock::time_point last_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket socket, Server::Impl& srv) : stream_(std::move(socket)), srv_(srv) {}

    void start() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

private:
    void on_read(beast::error_code ec) {
        if (ec) return;
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_) && target == "/ws") {
            stream_.expires_never();
            std::make_shared<WsConnection>(stream_.release_socket(), srv_)->start(std::move(req_));
            return;
        }
        if (req_.method() != http::verb::get) return respond(http::status::method_not_allowed, "{\"error\":\"GET only\"}");
        if (target == "/scenario") return respond(http::status::ok, srv_.effective);
        if (target == "/schema") return respond(http::status::ok, scenario_schema_text());
        if (target == "/schema/frames") return respond(http::status::ok, frames_schema_text());
        respond(http::status::not_found, "{\"error\":\"not found\"}");
    }

    void respond(http::status status, const std::string& body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::content_type, "application/json");
        res->keep_alive(false);
        res->body() = body;
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    Server::Impl& srv_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

}  // namespace

void Server::Impl::accept() {
    acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        std::make_shared<HttpConnection>(std::move(socket), *this)->start();
        accept();
    });
}

Server::Server(Scenario scenario, double pace) : impl_(std::make_unique<Impl>(std::move(scenario), pace)) {}

Server::~Server() = default;

unsigned short Server::listen(const std::string& address, unsigned short port) {
    const tcp::endpoint ep{net::ip::make_address(address), port};
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    impl_->accept();
    return impl_->acceptor.local_endpoint().port();
}

void Server::run() { impl_->ioc.run(); }

void Server::stop() { impl_->ioc.stop(); }

void Server::set_tick_ms(unsigned ms) { impl_->tick_ms = std::max(1U, ms); }

int serve(const Scenario& scenario, const std::string& address, unsigned short port, double pace, std::ostream& out,
          std::ostream& err) {
    try {
        Server server(scenario, pace);
        const auto bound = server.listen(address, port);
        out << "serving " << to_string(scenario.style) << " on http://" << address << ":" << bound
            << " (ws: /ws, pace " << pace << ")" << std::endl;
        server.run();
    } catch (const boost::system::system_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace archsim
