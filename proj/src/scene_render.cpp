#include "foaground/scene_render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "foaground/io_util.hpp"
#include "foaground/json_util.hpp"
#include "foaground/parallel.hpp"

namespace foaground {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double comp(const Vec3& v, int axis) { return axis == 0 ? v.x : (axis == 1 ? v.y : v.z); }

// Entry distance of a ray into an axis-aligned box, or +inf on a miss.
double slab_entry(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
    double t_near = -kInf;
    double t_far = kInf;
    for (int a = 0; a < 3; ++a) {
        const double o = comp(origin, a);
        const double d = comp(dir, a);
        const double l = comp(lo, a);
        const double h = comp(hi, a);
        if (d == 0.0) {
            if (o < l || o > h) return kInf;
            continue;
        }
        double t0 = (l - o) / d;
        double t1 = (h - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
    }
    if (t_far < t_near || t_near <= 0.0) return kInf;
    return t_near;
}

// Exit distance from the room interior.
double room_exit(const Vec3& origin, const Vec3& dir, const Vec3& dims) {
    double t = kInf;
    for (int a = 0; a < 3; ++a) {
        const double d = comp(dir, a);
        if (d > 0.0) t = std::min(t, (comp(dims, a) - comp(origin, a)) / d);
        if (d < 0.0) t = std::min(t, -comp(origin, a) / d);
    }
    return t;
}

bool strictly_inside(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
}

const Loudspeaker& find_speaker(const VisualScene& scene, int id) {
    for (const auto& s : scene.loudspeakers) {
        if (s.id == id) return s;
    }
    throw Error(ErrorKind::Lookup, "no loudspeaker with id " + std::to_string(id));
}

}  // namespace

void validate(const VisualScene& scene) {
    const Vec3& L = scene.room_dims;
    if (!(L.x > 0.0 && L.y > 0.0 && L.z > 0.0)) throw Error(ErrorKind::Geometry, "room dimensions must be positive");
    validate(scene.intrinsics);
    if (!std::isfinite(scene.camera.yaw_deg)) throw Error(ErrorKind::Range, "camera yaw is not finite");
    if (!strictly_inside(scene.camera.position, {}, L)) throw Error(ErrorKind::Geometry, "camera is outside the room");
    std::set<int> ids;
    for (const auto& s : scene.loudspeakers) {
        if (s.id <= 0 || s.id > 0xFFFF) throw Error(ErrorKind::Range, "loudspeaker ids must be in 1..65535");
        if (!ids.insert(s.id).second) throw Error(ErrorKind::Geometry, "duplicate loudspeaker id " + std::to_string(s.id));
        if (!(s.extents.x > 0.0 && s.extents.y > 0.0 && s.extents.z > 0.0)) {
            throw Error(ErrorKind::Geometry, "loudspeaker extents must be positive");
        }
        const Vec3 lo = s.center - 0.5 * s.extents;
        const Vec3 hi = s.center + 0.5 * s.extents;
        if (lo.x < 0.0 || lo.y < 0.0 || lo.z < 0.0 || hi.x > L.x || hi.y > L.y || hi.z > L.z) {
            throw Error(ErrorKind::Geometry, "loudspeaker " + std::to_string(s.id) + " leaves the room");
        }
        if (!(scene.camera.position.x < lo.x || scene.camera.position.x > hi.x || scene.camera.position.y < lo.y ||
              scene.camera.position.y > hi.y || scene.camera.position.z < lo.z || scene.camera.position.z > hi.z)) {
            throw Error(ErrorKind::Geometry, "camera is inside loudspeaker " + std::to_string(s.id));
        }
    }
}

RenderOutput render_depth(const VisualScene& scene, int threads) {
    validate(scene);
    const auto& k = scene.intrinsics;
    RenderOutput out;
    out.depth.intrinsics = k;
    out.depth.depth = Raster<double>(k.height, k.width, 0.0);
    out.mask = InstanceMask(k.height, k.width, 0);

    std::vector<std::pair<Vec3, Vec3>> boxes;
    for (const auto& s : scene.loudspeakers) boxes.emplace_back(s.center - 0.5 * s.extents, s.center + 0.5 * s.extents);
    const Vec3 origin = scene.camera.position;

    parallel_for(static_cast<std::size_t>(k.height), threads, [&](std::size_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < k.width; ++u) {
            // With a camera-frame z of -1 the ray parameter is the pinhole depth.
            const Vec3 dir = rotate_yaw(backproject_pixel(u, v, 1.0, k), scene.camera.yaw_deg);
            double best = room_exit(origin, dir, scene.room_dims);
            std::uint16_t id = 0;
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                const double t = slab_entry(origin, dir, boxes[b].first, boxes[b].second);
                if (t < best || (id == 0 && t == best)) {
                    best = t;
                    id = static_cast<std::uint16_t>(scene.loudspeakers[b].id);
                }
            }
            if (std::isfinite(best)) out.depth.depth.at(v, u) = best;
            out.mask.at(v, u) = id;
        }
    });
    return out;
}

std::size_t visible_pixels(const InstanceMask& mask, int id) {
    if (id < 0 || id > 0xFFFF) return 0;
    return static_cast<std::size_t>(std::count(mask.data.begin(), mask.data.end(), static_cast<std::uint16_t>(id)));
}

int scaled_visibility_threshold(const CameraIntrinsics& k) {
    const long long area = static_cast<long long>(k.width) * k.height;
    return static_cast<int>(500LL * area / (1920LL * 1080LL));
}

Vec3 world_to_camera(const CameraPose& camera, const Vec3& world_point) {
    return rotate_yaw(world_point - camera.position, -camera.yaw_deg);
}

Vec3 camera_to_world(const CameraPose& camera, const Vec3& camera_point) {
    return rotate_yaw(camera_point, camera.yaw_deg) + camera.position;
}

Vec3 camera_frame_extents(const Vec3& world_extents, double yaw_deg) {
    const double c = std::abs(std::cos(deg2rad(yaw_deg)));
    const double s = std::abs(std::sin(deg2rad(yaw_deg)));
    return {c * world_extents.x + s * world_extents.z, world_extents.y, s * world_extents.x + c * world_extents.z};
}

Box3D gt_box_camera(const VisualScene& scene, int id) {
    const auto& s = find_speaker(scene, id);
    Vec3 lo{kInf, kInf, kInf};
    Vec3 hi{-kInf, -kInf, -kInf};
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 offset{(corner & 1 ? 0.5 : -0.5) * s.extents.x, (corner & 2 ? 0.5 : -0.5) * s.extents.y,
                          (corner & 4 ? 0.5 : -0.5) * s.extents.z};
        const Vec3 p = world_to_camera(scene.camera, s.center + offset);
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    return Box3D{"speaker", 0.5 * (lo + hi), hi - lo};
}

Vec3 sample_loudspeaker_extents(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(1.0 - kLoudspeakerJitter, 1.0 + kLoudspeakerJitter);
    const double jx = jitter(rng);
    const double jy = jitter(rng);
    const double jz = jitter(rng);
    return {kLoudspeakerBaseExtents.x * jx, kLoudspeakerBaseExtents.y * jy, kLoudspeakerBaseExtents.z * jz};
}

nlohmann::json to_json(const VisualScene& scene) {
    nlohmann::json speakers = nlohmann::json::array();
    for (const auto& s : scene.loudspeakers) {
        speakers.push_back({{"id", s.id}, {"center", vec_json(s.center)}, {"extents", vec_json(s.extents)}});
    }
    return {{"room_dims", vec_json(scene.room_dims)},
            {"loudspeakers", speakers},
            {"camera", {{"position", vec_json(scene.camera.position)}, {"yaw_deg", scene.camera.yaw_deg}}},
            {"intrinsics", to_json(scene.intrinsics)}};
}

VisualScene visual_scene_from_json(const nlohmann::json& j) {
    VisualScene scene;
    try {
        scene.room_dims = vec_from(j.at("room_dims"));
        for (const auto& s : j.at("loudspeakers")) {
            scene.loudspeakers.push_back({s.at("id").get<int>(), vec_from(s.at("center")), vec_from(s.at("extents"))});
        }
        scene.camera.position = vec_from(j.at("camera").at("position"));
        scene.camera.yaw_deg = j.at("camera").at("yaw_deg").get<double>();
        scene.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("bad visual scene: ") + e.what());
    }
    validate(scene);
    return scene;
}

void write_instance_mask(const std::filesystem::path& stem, const InstanceMask& mask) {
    if (mask.size() != static_cast<std::size_t>(mask.height) * static_cast<std::size_t>(mask.width)) {
        throw Error(ErrorKind::Shape, "mask raster size does not match its dimensions");
    }
    std::set<int> ids;
    std::string raw;
    raw.reserve(mask.size() * 2);
    for (auto id : mask.data) {
        if (id != 0) ids.insert(id);
        io::append_le<std::uint16_t>(raw, id);
    }
    const nlohmann::json meta{{"width", mask.width}, {"height", mask.height}, {"ids", ids}};
    io::write_file(io::with_suffix(stem, ".json"), meta.dump(2) + "\n");
    io::write_file(io::with_suffix(stem, ".bin"), raw);
}

InstanceMask read_instance_mask(const std::filesystem::path& stem) {
    int width = 0;
    int height = 0;
    std::set<int> ids;
    try {
        const auto meta = nlohmann::json::parse(io::read_file(io::with_suffix(stem, ".json")));
        width = meta.at("width").get<int>();
        height = meta.at("height").get<int>();
        for (const auto& id : meta.at("ids")) ids.insert(id.get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, "bad mask sidecar " + stem.string() + ": " + e.what());
    }
    if (width <= 0 || height <= 0) throw Error(ErrorKind::Format, "mask size must be positive");
    const auto raw = io::read_file(io::with_suffix(stem, ".bin"));
    InstanceMask mask(height, width);
    if (raw.size() != mask.size() * 2) {
        throw Error(ErrorKind::Format, "mask raster holds " + std::to_string(raw.size()) + " bytes, expected " +
                                           std::to_string(mask.size() * 2));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto id = io::read_le<std::uint16_t>(p + 2 * i);
        if (id != 0 && !ids.contains(id)) {
            throw Error(ErrorKind::Format, "mask pixel holds id " + std::to_string(id) + " missing from the sidecar");
        }
        mask.data[i] = id;
    }
    return mask;
}

}  // namespace foaground
