#pragma once

#include "archsim/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace archsim {

enum class MessageKind : std::uint8_t { Request, Reply, Failure };

const char* to_string(MessageKind kind);

struct Fragment {
    std::uint32_t index = 0;
    std::uint32_t of_total = 1;

    friend bool operator==(const Fragment&, const Fragment&) = default;
};

/// Request/reply envelope. `hop_path` is the P2P return path: each forwarding
/// peer pushes itself and each reply hop pops one entry.
struct Message {
    std::uint64_t request_id = 0;
    MessageKind kind = MessageKind::Request;
    std::string service;  // Request
    std::string reason;   // Failure
    ComponentId origin_client;
    std::vector<ComponentId> hop_path;
    std::optional<std::uint32_t> ttl_hops;  // nullopt: unlimited
    SimTime created_at;
    std::optional<Fragment> fragment;
    std::uint32_t hops = 0;  // transmissions so far

    friend bool operator==(const Message&, const Message&) = default;

    static Message request(std::uint64_t id, std::string service, ComponentId client, SimTime at) {
        Message m;
        m.request_id = id;
        m.kind = MessageKind::Request;
        m.service = std::move(service);
        m.origin_client = client;
        m.created_at = at;
        return m;
    }

    /// A reply for the same request, keeping correlation fields.
    Message as_reply() const {
        Message m = *this;
        m.kind = MessageKind::Reply;
        m.reason.clear();
        return m;
    }

    Message as_failure(std::string why) const {
        Message m = *this;
        m.kind = MessageKind::Failure;
        m.reason = std::move(why);
        return m;
    }
};

}  // namespace archsim
