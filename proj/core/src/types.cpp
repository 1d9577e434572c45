#include "archsim/types.hpp"

#include "archsim/message.hpp"

namespace archsim {

const char* to_string(Role role) {
    switch (role) {
        case Role::Client: return "client";
        case Role::Layer: return "layer";
        case Role::Filter: return "filter";
        case Role::Sink: return "sink";
        case Role::Directory: return "directory";
        case Role::Service: return "service";
        case Role::Leader: return "leader";
        case Role::Worker: return "worker";
        case Role::Peer: return "peer";
    }
    return "?";
}

const char* to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::Request: return "request";
        case MessageKind::Reply: return "reply";
        case MessageKind::Failure: return "failure";
    }
    return "?";
}

SchedulingInPast::SchedulingInPast(SimTime requested, SimTime now)
    : Error("scheduling in the past: t=" + std::to_string(requested.micros) + " < now=" +
            std::to_string(now.micros)) {}

UnknownStream::UnknownStream(std::uint32_t stream) : Error("unknown rng stream " + std::to_string(stream)) {}

}  // namespace archsim
