#pragma once

#include <nlohmann/json.hpp>

#include "foaground/spatial_frame.hpp"

namespace foaground {

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Format, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

}  // namespace foaground
