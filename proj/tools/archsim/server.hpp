#pragma once

#include <archsim/scenario.hpp>

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

namespace archsim {

/// HTTP + WebSocket front end for interactive sessions.
///   GET /scenario        effective scenario (canonical JSON)
///   GET /schema          scenario schema
///   GET /schema/frames   session frame schema
///   /ws                  WebSocket carrying JSON frames
/// One engine per connection; a second connection while one is live is refused.
class Server {
public:
    Server(Scenario scenario, double pace);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting. Returns the bound port.
    unsigned short listen(const std::string& address, unsigned short port);
    /// Serves until stop() is called.
    void run();
    /// Thread-safe.
    void stop();

    /// Wall-clock tick period of live sessions.
    void set_tick_ms(unsigned ms);

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// Blocking entry point behind `archsim serve`.
int serve(const Scenario& scenario, const std::string& address, unsigned short port, double pace, std::ostream& out,
          std::ostream& err);

const std::string& scenario_schema_text();
const std::string& frames_schema_text();

}  // namespace archsim
