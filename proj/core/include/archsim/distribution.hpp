#pragma once

#include "archsim/rng.hpp"
#include "archsim/types.hpp"

#include <nlohmann/json.hpp>

namespace archsim {

/// Processing or transfer time. Constant values are returned verbatim (zero is
/// allowed, it models "no cost"); exponential samples round to the nearest
/// microsecond and are clamped to at least 1us.
struct Distribution {
    enum class Kind : std::uint8_t { Constant, Exponential };

    Kind kind = Kind::Constant;
    Micros micros = 0;  // the constant, or the mean

    static constexpr Distribution constant(Micros value) { return {Kind::Constant, value}; }
    static constexpr Distribution exponential(Micros mean) { return {Kind::Exponential, mean}; }

    /// Constant distributions never draw from the stream.
    Micros sample(Pcg32& rng) const;

    /// Same kind, new parameter. Used by rate changes.
    Distribution with_value(Micros value) const { return {kind, value}; }

    friend bool operator==(const Distribution&, const Distribution&) = default;
};

nlohmann::json to_json_value(const Distribution& d);

}  // namespace archsim
