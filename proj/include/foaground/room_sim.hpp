#pragma once

// Shoebox room acoustics: image-source FOA impulse responses, convolution
// rendering, constrained pose sampling and synthetic source signals.
//
// World frame: the room spans [0, Lx] x [0, Ly] x [0, Lz] with y up. A
// receiver with yaw 0 looks along world -z, so its camera frame coincides
// with the world axes; positive yaw turns it left.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "foaground/foa_core.hpp"

namespace foaground {

enum Wall : int { kWallXLow = 0, kWallXHigh, kWallYLow, kWallYHigh, kWallZLow, kWallZHigh };

struct RoomSpec {
    Vec3 dims{4.0, 3.0, 5.0};
    std::array<double, 6> absorption{0.7, 0.7, 0.7, 0.7, 0.7, 0.7};
    double speed_of_sound = 343.0;
    int max_order = 0;

    static RoomSpec uniform(const Vec3& dims, double absorption, int max_order = 0);
    friend bool operator==(const RoomSpec&, const RoomSpec&) = default;
};

void validate(const RoomSpec& room);

inline constexpr double kWallClearance = 0.5;
inline constexpr double kMinSourceDistance = 1.0;
inline constexpr double kMaxSourceDistance = 4.0;

bool inside_with_clearance(const RoomSpec& room, const Vec3& p, double clearance = kWallClearance);

struct ImageSource {
    Vec3 position;
    int reflections = 0;
    std::array<int, 6> wall_hits{};  // reflections per wall, indexed by Wall
};

// All mirror images with total reflection count <= order, original first.
std::vector<ImageSource> image_sources(const RoomSpec& room, const Vec3& src, int order);

struct RirConfig {
    double sample_rate = 16000.0;
    // 0 sizes the response to its last arrival; otherwise a hard limit.
    std::size_t length = 0;
};

struct FoaRir {
    std::array<std::vector<double>, 4> channels;
    double sample_rate = 16000.0;

    [[nodiscard]] std::size_t length() const { return channels[0].size(); }
};

FoaRir render_foa_rir(const RoomSpec& room, const Vec3& src, const Vec3& receiver, double receiver_yaw_deg,
                      const RirConfig& cfg = {});

enum class SourceKind { HarmonicTone, BandNoise };

std::string to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& text);

struct SourceSignal {
    SourceKind kind = SourceKind::BandNoise;
    Band band;
    std::vector<double> samples;
    double sample_rate = 16000.0;
    std::uint64_t seed = 0;
    double fundamental_hz = 0.0;  // harmonic tones only
};

inline constexpr int kToneHarmonics = 8;

// Unit-RMS synthetic source.
//   HarmonicTone: 8 consecutive equal-amplitude harmonics n0*f0 .. (n0+7)*f0,
//     n0 the first harmonic at or above band.lo. Unless given, f0 is drawn
//     uniformly from [(hi-lo)/16, (hi-lo)/8] and snapped down to a whole
//     number of cycles per clip, which keeps every harmonic inside the band.
//   BandNoise: white Gaussian noise with a brick-wall band-pass in the
//     frequency domain.
SourceSignal synth_source(SourceKind kind, Band band, double duration_s, std::uint64_t seed,
                          double sample_rate = 16000.0, std::optional<double> fundamental_hz = std::nullopt);

// Full linear convolution of every RIR channel with the dry signal.
FoaSignal render_foa(const FoaRir& rir, const SourceSignal& dry);
FoaSignal render_foa(const FoaRir& rir, std::span<const double> dry, double sample_rate);

// Sample-wise sum, zero-padding to the longest input.
FoaSignal mix(const std::vector<FoaSignal>& signals);

// Brick-wall band-pass of every channel (frequency-domain, whole clip).
FoaSignal band_limit(const FoaSignal& signal, const Band& band);

struct ScenePose {
    std::vector<Vec3> source_positions;
    Vec3 receiver_position;
    double receiver_yaw_deg = 0.0;
};

// Checks clearance and the 1-4 m source distance rule; returns a reason on
// failure.
std::optional<std::string> check_pose(const RoomSpec& room, const ScenePose& pose);

inline constexpr int kMaxRejections = 10000;

ScenePose sample_scene(const RoomSpec& room, int n_sources, std::mt19937_64& rng);

// Direction of a world point as seen by a yawed receiver.
DoA receiver_doa(const Vec3& world_point, const Vec3& receiver, double receiver_yaw_deg);

struct SourceDescription {
    SourceKind kind = SourceKind::BandNoise;
    Band band;
    std::uint64_t seed = 0;
    std::optional<double> fundamental_hz;
};

// Serializable single-scene record (see README for the JSON layout).
struct SceneDescription {
    RoomSpec room;
    ScenePose pose;
    std::vector<SourceDescription> sources;
    double sample_rate = 16000.0;
    double duration_s = 1.0;
};

nlohmann::json to_json(const SceneDescription& scene);
SceneDescription scene_from_json(const nlohmann::json& j);

FoaSignal render_scene(const SceneDescription& scene);

}  // namespace foaground
