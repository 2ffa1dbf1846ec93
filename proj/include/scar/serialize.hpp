#pragma once

#include <json.hpp>

#include "scar/error.hpp"
#include "scar/geometry.hpp"

namespace scar {

inline nlohmann::ordered_json domain_to_json(const Domain& d) {
    nlohmann::ordered_json j;
    if (d.kind() == Domain::Kind::QuarterStadium) {
        j["kind"] = "quarter_stadium";
    } else {
        j["kind"] = "rectangle";
        j["width"] = d.width();
        j["height"] = d.height();
    }
    return j;
}

/// Accepts {"kind": "quarter_stadium"}, {"kind": "rectangle", "width": w, "height": h}
/// or the bare string "quarter_stadium".
template <class Json>
Domain domain_from_json(const Json& j) {
    if (j.is_string()) {
        if (j.template get<std::string>() == "quarter_stadium") return Domain::quarter_stadium();
        throw Error(ErrorKind::Config, "unknown domain '" + j.template get<std::string>() + "'");
    }
    const std::string kind = j.value("kind", std::string{"quarter_stadium"});
    if (kind == "quarter_stadium") return Domain::quarter_stadium();
    if (kind == "rectangle")
        return Domain::rectangle(j.value("width", 1.0), j.value("height", 1.0));
    throw Error(ErrorKind::Config, "unknown domain kind '" + kind + "'");
}

} // namespace scar
