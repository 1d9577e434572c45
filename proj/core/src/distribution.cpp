#include "archsim/distribution.hpp"

#include <cmath>

namespace archsim {

Micros Distribution::sample(Pcg32& rng) const {
    if (kind == Kind::Constant) return micros;
    const double draw = -static_cast<double>(micros) * std::log(rng.unit_open_closed());
    const auto rounded = static_cast<Micros>(std::llround(draw));
    return rounded < 1 ? 1 : rounded;
}

nlohmann::json to_json_value(const Distribution& d) {
    if (d.kind == Distribution::Kind::Constant) return {{"kind", "constant"}, {"micros", d.micros}};
    return {{"kind", "exponential"}, {"mean_micros", d.micros}};
}

}  // namespace archsim
