#pragma once

// Raycast depth renderer for a shoebox room with axis-aligned loudspeaker
// boxes. The camera sits at a world position with a yaw and no pitch; its
// frame follows the spatial_frame conventions.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "foaground/spatial_frame.hpp"

namespace foaground {

struct Loudspeaker {
    int id = 1;      // 1..65535, 0 is background in masks
    Vec3 center;     // world frame
    Vec3 extents;

    friend bool operator==(const Loudspeaker&, const Loudspeaker&) = default;
};

struct CameraPose {
    Vec3 position;
    double yaw_deg = 0.0;

    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

struct VisualScene {
    Vec3 room_dims{4.0, 3.0, 5.0};
    std::vector<Loudspeaker> loudspeakers;
    CameraPose camera;
    CameraIntrinsics intrinsics;
};

void validate(const VisualScene& scene);

using InstanceMask = Raster<std::uint16_t>;

struct RenderOutput {
    DepthFrame depth;
    InstanceMask mask;
};

RenderOutput render_depth(const VisualScene& scene, int threads = 1);

std::size_t visible_pixels(const InstanceMask& mask, int id);

// 500 px at 1920x1080, scaled by image area and rounded down.
int scaled_visibility_threshold(const CameraIntrinsics& k);

Vec3 world_to_camera(const CameraPose& camera, const Vec3& world_point);
Vec3 camera_to_world(const CameraPose& camera, const Vec3& camera_point);

// Axis-aligned extents of a world-aligned box seen from a yawed camera.
Vec3 camera_frame_extents(const Vec3& world_extents, double yaw_deg);

Box3D gt_box_camera(const VisualScene& scene, int id);

inline constexpr Vec3 kLoudspeakerBaseExtents{0.35, 0.9, 0.35};
inline constexpr double kLoudspeakerJitter = 0.15;

Vec3 sample_loudspeaker_extents(std::mt19937_64& rng);

nlohmann::json to_json(const VisualScene& scene);
VisualScene visual_scene_from_json(const nlohmann::json& j);

// "<stem>.bin" raw uint16 LE, "<stem>.json" {width, height, ids}.
void write_instance_mask(const std::filesystem::path& stem, const InstanceMask& mask);
InstanceMask read_instance_mask(const std::filesystem::path& stem);

}  // namespace foaground
