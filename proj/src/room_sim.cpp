#include "foaground/room_sim.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "foaground/fft.hpp"
#include "foaground/json_util.hpp"

namespace foaground {

RoomSpec RoomSpec::uniform(const Vec3& dims, double absorption, int max_order) {
    RoomSpec room;
    room.dims = dims;
    room.absorption.fill(absorption);
    room.max_order = max_order;
    return room;
}

void validate(const RoomSpec& room) {
    if (!(room.dims.x > 0.0 && room.dims.y > 0.0 && room.dims.z > 0.0)) {
        throw Error(ErrorKind::Config, "room dimensions must be positive");
    }
    for (double a : room.absorption) {
        if (!(a > 0.0 && a <= 1.0)) throw Error(ErrorKind::Config, "absorption must lie in (0, 1]");
    }
    if (!(room.speed_of_sound > 0.0)) throw Error(ErrorKind::Config, "speed of sound must be positive");
    if (room.max_order < 0) throw Error(ErrorKind::Config, "reflection order must be nonnegative");
}

bool inside_with_clearance(const RoomSpec& room, const Vec3& p, double clearance) {
    const auto in = [clearance](double v, double len) { return v >= clearance && v <= len - clearance; };
    return in(p.x, room.dims.x) && in(p.y, room.dims.y) && in(p.z, room.dims.z);
}

namespace {

struct AxisImage {
    double position;
    int low_hits;
    int high_hits;
};

// Image index m along one axis: even m -> m*L + s, odd m -> (m+1)*L - s,
// with |m| reflections split between the two walls.
AxisImage axis_image(int m, double s, double len) {
    const double pos = (m % 2 == 0) ? m * len + s : (m + 1) * len - s;
    const int a = std::abs(m);
    const int big = (a + 1) / 2;
    const int small = a / 2;
    if (m >= 0) return {pos, small, big};
    return {pos, big, small};
}

}  // namespace

std::vector<ImageSource> image_sources(const RoomSpec& room, const Vec3& src, int order) {
    validate(room);
    if (order < 0) throw Error(ErrorKind::Config, "reflection order must be nonnegative");
    if (!inside_with_clearance(room, src, 0.0)) throw Error(ErrorKind::Geometry, "source lies outside the room");

    std::vector<ImageSource> out;
    out.push_back({src, 0, {}});
    for (int mx = -order; mx <= order; ++mx) {
        const int rem_x = order - std::abs(mx);
        for (int my = -rem_x; my <= rem_x; ++my) {
            const int rem_y = rem_x - std::abs(my);
            for (int mz = -rem_y; mz <= rem_y; ++mz) {
                if (mx == 0 && my == 0 && mz == 0) continue;
                const auto ix = axis_image(mx, src.x, room.dims.x);
                const auto iy = axis_image(my, src.y, room.dims.y);
                const auto iz = axis_image(mz, src.z, room.dims.z);
                ImageSource img;
                img.position = {ix.position, iy.position, iz.position};
                img.reflections = std::abs(mx) + std::abs(my) + std::abs(mz);
                img.wall_hits = {ix.low_hits, ix.high_hits, iy.low_hits, iy.high_hits, iz.low_hits, iz.high_hits};
                out.push_back(img);
            }
        }
    }
    return out;
}

DoA receiver_doa(const Vec3& world_point, const Vec3& receiver, double receiver_yaw_deg) {
    return angles_from_dir(rotate_yaw(world_point - receiver, -receiver_yaw_deg));
}

FoaRir render_foa_rir(const RoomSpec& room, const Vec3& src, const Vec3& receiver, double receiver_yaw_deg,
                      const RirConfig& cfg) {
    validate(room);
    if (!(cfg.sample_rate > 0.0)) throw Error(ErrorKind::Config, "sample rate must be positive");
    if (!inside_with_clearance(room, receiver, 0.0)) throw Error(ErrorKind::Geometry, "receiver lies outside the room");

    struct Tap {
        std::size_t delay;
        double amplitude;
        std::array<double, 4> gains;
    };
    std::vector<Tap> taps;
    std::array<double, 6> beta{};
    for (std::size_t w = 0; w < 6; ++w) beta[w] = std::sqrt(1.0 - room.absorption[w]);

    std::size_t max_delay = 0;
    for (const auto& img : image_sources(room, src, room.max_order)) {
        const Vec3 rel = img.position - receiver;
        const double d = rel.norm();
        if (!(d > 1e-9)) throw Error(ErrorKind::Geometry, "source coincides with the receiver");
        double amp = 1.0 / std::max(d, 0.1);
        for (std::size_t w = 0; w < 6; ++w) {
            if (img.wall_hits[w] > 0) amp *= std::pow(beta[w], img.wall_hits[w]);
        }
        if (amp == 0.0) continue;
        const auto delay = static_cast<std::size_t>(std::llround(d / room.speed_of_sound * cfg.sample_rate));
        max_delay = std::max(max_delay, delay);
        taps.push_back({delay, amp, encode_gains(rotate_yaw(rel, -receiver_yaw_deg))});
    }

    const std::size_t required = max_delay + 1;
    if (cfg.length != 0 && required > cfg.length) {
        throw Error(ErrorKind::Length, "impulse response needs " + std::to_string(required) +
                                           " samples but only " + std::to_string(cfg.length) + " are configured");
    }
    FoaRir rir;
    rir.sample_rate = cfg.sample_rate;
    for (auto& ch : rir.channels) ch.assign(cfg.length != 0 ? cfg.length : required, 0.0);
    for (const auto& tap : taps) {
        for (std::size_t c = 0; c < 4; ++c) rir.channels[c][tap.delay] += tap.amplitude * tap.gains[c];
    }
    return rir;
}

std::string to_string(SourceKind kind) {
    return kind == SourceKind::HarmonicTone ? "harmonic_tone" : "band_noise";
}

SourceKind source_kind_from_string(const std::string& text) {
    if (text == "harmonic_tone") return SourceKind::HarmonicTone;
    if (text == "band_noise") return SourceKind::BandNoise;
    throw Error(ErrorKind::Parse, "unknown source kind '" + text + "'");
}

namespace {

void normalize_rms(std::vector<double>& x) {
    double energy = 0.0;
    for (double v : x) energy += v * v;
    if (!(energy > 0.0)) throw Error(ErrorKind::Config, "synthesized signal is silent");
    const double scale = 1.0 / std::sqrt(energy / static_cast<double>(x.size()));
    for (double& v : x) v *= scale;
}

std::vector<double> brick_wall(std::span<const double> x, double sample_rate, const Band& band) {
    auto bins = fft::rfft(x);
    const double n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate / n;
        if (f < band.lo_hz || f > band.hi_hz) bins[k] = 0.0;
    }
    return fft::irfft(bins, x.size());
}

}  // namespace

SourceSignal synth_source(SourceKind kind, Band band, double duration_s, std::uint64_t seed, double sample_rate,
                          std::optional<double> fundamental_hz) {
    if (!(sample_rate > 0.0)) throw Error(ErrorKind::Config, "sample rate must be positive");
    if (!(band.lo_hz >= 0.0 && band.lo_hz < band.hi_hz && band.hi_hz <= sample_rate / 2.0)) {
        throw Error(ErrorKind::Config, "band must satisfy 0 <= lo < hi <= fs/2");
    }
    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    if (!(duration_s > 0.0) || n == 0) throw Error(ErrorKind::Length, "source duration yields an empty signal");

    SourceSignal out;
    out.kind = kind;
    out.band = band;
    out.sample_rate = sample_rate;
    out.seed = seed;
    std::mt19937_64 rng(seed);

    if (kind == SourceKind::BandNoise) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> white(n);
        for (double& v : white) v = gauss(rng);
        out.samples = brick_wall(white, sample_rate, band);
        normalize_rms(out.samples);
        return out;
    }

    const double clip_s = static_cast<double>(n) / sample_rate;
    double f0 = 0.0;
    if (fundamental_hz) {
        f0 = *fundamental_hz;
    } else {
        const double width = band.hi_hz - band.lo_hz;
        std::uniform_real_distribution<double> pick(width / 16.0, width / 8.0);
        f0 = std::floor(pick(rng) * clip_s) / clip_s;
    }
    if (!(f0 > 0.0)) throw Error(ErrorKind::Config, "band admits no fundamental for this clip length");
    const double first = std::max(1.0, std::ceil(band.lo_hz / f0 - 1e-9));
    if ((first + kToneHarmonics - 1) * f0 > band.hi_hz + 1e-9) {
        throw Error(ErrorKind::Config, "fundamental " + std::to_string(f0) + " Hz cannot fit " +
                                           std::to_string(kToneHarmonics) + " harmonics in the band");
    }
    out.fundamental_hz = f0;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    std::array<double, kToneHarmonics> phases{};
    for (double& p : phases) p = phase(rng);
    out.samples.assign(n, 0.0);
    for (int h = 0; h < kToneHarmonics; ++h) {
        const double w = 2.0 * kPi * (first + h) * f0 / sample_rate;
        for (std::size_t t = 0; t < n; ++t) {
            out.samples[t] += std::sin(w * static_cast<double>(t) + phases[static_cast<std::size_t>(h)]);
        }
    }
    normalize_rms(out.samples);
    return out;
}

FoaSignal render_foa(const FoaRir& rir, std::span<const double> dry, double sample_rate) {
    if (rir.sample_rate != sample_rate) {
        throw Error(ErrorKind::Config, "impulse response at " + std::to_string(rir.sample_rate) +
                                           " Hz cannot render a source at " + std::to_string(sample_rate) + " Hz");
    }
    FoaSignal out;
    out.sample_rate = sample_rate;
    if (dry.empty() || rir.length() == 0) return out;
    const std::size_t len = dry.size() + rir.length() - 1;
    for (std::size_t c = 0; c < 4; ++c) {
        auto& y = out.channels[c];
        y.assign(len, 0.0);
        const auto& h = rir.channels[c];
        // RIRs from the image model are sparse; skip empty taps.
        for (std::size_t k = 0; k < h.size(); ++k) {
            const double g = h[k];
            if (g == 0.0) continue;
            double* dst = y.data() + k;
            for (std::size_t t = 0; t < dry.size(); ++t) dst[t] += g * dry[t];
        }
    }
    return out;
}

FoaSignal render_foa(const FoaRir& rir, const SourceSignal& dry) {
    return render_foa(rir, dry.samples, dry.sample_rate);
}

FoaSignal mix(const std::vector<FoaSignal>& signals) {
    FoaSignal out;
    if (signals.empty()) return out;
    out.sample_rate = signals.front().sample_rate;
    std::size_t len = 0;
    for (const auto& s : signals) {
        validate(s);
        if (s.sample_rate != out.sample_rate) throw Error(ErrorKind::Config, "cannot mix different sample rates");
        len = std::max(len, s.length());
    }
    for (auto& ch : out.channels) ch.assign(len, 0.0);
    for (const auto& s : signals) {
        for (std::size_t c = 0; c < 4; ++c) {
            for (std::size_t t = 0; t < s.length(); ++t) out.channels[c][t] += s.channels[c][t];
        }
    }
    return out;
}

FoaSignal band_limit(const FoaSignal& signal, const Band& band) {
    validate(signal);
    FoaSignal out;
    out.sample_rate = signal.sample_rate;
    for (std::size_t c = 0; c < 4; ++c) out.channels[c] = brick_wall(signal.channels[c], signal.sample_rate, band);
    return out;
}

std::optional<std::string> check_pose(const RoomSpec& room, const ScenePose& pose) {
    if (!inside_with_clearance(room, pose.receiver_position)) return "receiver violates wall clearance";
    for (std::size_t i = 0; i < pose.source_positions.size(); ++i) {
        const auto& s = pose.source_positions[i];
        if (!inside_with_clearance(room, s)) return "source " + std::to_string(i) + " violates wall clearance";
        const double d = (s - pose.receiver_position).norm();
        if (d < kMinSourceDistance || d > kMaxSourceDistance) {
            return "source " + std::to_string(i) + " is " + std::to_string(d) + " m from the receiver";
        }
    }
    return std::nullopt;
}

ScenePose sample_scene(const RoomSpec& room, int n_sources, std::mt19937_64& rng) {
    validate(room);
    if (n_sources < 0) throw Error(ErrorKind::Config, "source count must be nonnegative");
    const auto infeasible = [] {
        return Error(ErrorKind::Geometry, "no pose satisfied the clearance and distance constraints after " +
                                              std::to_string(kMaxRejections) + " rejections");
    };
    const auto& L = room.dims;
    if (L.x <= 2 * kWallClearance || L.y <= 2 * kWallClearance || L.z <= 2 * kWallClearance) throw infeasible();

    std::uniform_real_distribution<double> ux(kWallClearance, L.x - kWallClearance);
    std::uniform_real_distribution<double> uy(kWallClearance, L.y - kWallClearance);
    std::uniform_real_distribution<double> uz(kWallClearance, L.z - kWallClearance);
    std::uniform_real_distribution<double> yaw(-180.0, 180.0);
    std::uniform_real_distribution<double> radius_cubed(std::pow(kMinSourceDistance, 3), std::pow(kMaxSourceDistance, 3));
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr int kTriesPerReceiver = 200;

    int rejections = 0;
    while (true) {
        ScenePose pose;
        pose.receiver_position = {ux(rng), uy(rng), uz(rng)};
        pose.receiver_yaw_deg = yaw(rng);
        bool ok = true;
        for (int i = 0; i < n_sources && ok; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < kTriesPerReceiver; ++attempt) {
                Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
                const double n = dir.norm();
                if (!(n > 0.0)) continue;
                const double r = std::cbrt(radius_cubed(rng));
                const Vec3 p = pose.receiver_position + dir * (r / n);
                const double d = (p - pose.receiver_position).norm();
                if (inside_with_clearance(room, p) && d >= kMinSourceDistance && d <= kMaxSourceDistance) {
                    pose.source_positions.push_back(p);
                    placed = true;
                    break;
                }
                if (++rejections > kMaxRejections) throw infeasible();
            }
            ok = placed;
        }
        // A shoebox is convex, so the geodesic path equals the straight line
        // and the navigability ratio test always passes.
        if (ok) return pose;
    }
}

nlohmann::json to_json(const SceneDescription& scene) {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : scene.sources) {
        nlohmann::json js{{"kind", to_string(s.kind)},
                          {"band", nlohmann::json::array({s.band.lo_hz, s.band.hi_hz})},
                          {"seed", s.seed}};
        if (s.fundamental_hz) js["fundamental_hz"] = *s.fundamental_hz;
        sources.push_back(js);
    }
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& p : scene.pose.source_positions) positions.push_back(vec_json(p));
    return {
        {"room", {{"dims", vec_json(scene.room.dims)}, {"speed_of_sound", scene.room.speed_of_sound}}},
        {"absorption", scene.room.absorption},
        {"poses",
         {{"receiver", vec_json(scene.pose.receiver_position)},
          {"receiver_yaw_deg", scene.pose.receiver_yaw_deg},
          {"sources", positions}}},
        {"sources", sources},
        {"sample_rate", scene.sample_rate},
        {"max_order", scene.room.max_order},
        {"duration_s", scene.duration_s},
    };
}

SceneDescription scene_from_json(const nlohmann::json& j) {
    try {
        SceneDescription scene;
        scene.room.dims = vec_from(j.at("room").at("dims"));
        scene.room.speed_of_sound = j.at("room").value("speed_of_sound", 343.0);
        const auto& absorption = j.at("absorption");
        if (absorption.is_number()) {
            scene.room.absorption.fill(absorption.get<double>());
        } else {
            if (!absorption.is_array() || absorption.size() != 6) {
                throw Error(ErrorKind::Format, "absorption must be a scalar or 6 per-wall values");
            }
            for (std::size_t w = 0; w < 6; ++w) scene.room.absorption[w] = absorption[w].get<double>();
        }
        scene.room.max_order = j.value("max_order", 0);
        scene.sample_rate = j.value("sample_rate", 16000.0);
        scene.duration_s = j.value("duration_s", 1.0);
        const auto& poses = j.at("poses");
        scene.pose.receiver_position = vec_from(poses.at("receiver"));
        scene.pose.receiver_yaw_deg = poses.value("receiver_yaw_deg", 0.0);
        for (const auto& p : poses.at("sources")) scene.pose.source_positions.push_back(vec_from(p));
        for (const auto& s : j.at("sources")) {
            SourceDescription src;
            src.kind = source_kind_from_string(s.at("kind").get<std::string>());
            src.band = {s.at("band").at(0).get<double>(), s.at("band").at(1).get<double>()};
            src.seed = s.at("seed").get<std::uint64_t>();
            if (s.contains("fundamental_hz")) src.fundamental_hz = s.at("fundamental_hz").get<double>();
            scene.sources.push_back(src);
        }
        if (scene.sources.size() != scene.pose.source_positions.size()) {
            throw Error(ErrorKind::Format, "poses list " + std::to_string(scene.pose.source_positions.size()) +
                                               " source positions for " + std::to_string(scene.sources.size()) +
                                               " sources");
        }
        validate(scene.room);
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("bad scene description: ") + e.what());
    }
}

FoaSignal render_scene(const SceneDescription& scene) {
    std::vector<FoaSignal> parts;
    RirConfig cfg;
    cfg.sample_rate = scene.sample_rate;
    for (std::size_t i = 0; i < scene.sources.size(); ++i) {
        const auto& s = scene.sources[i];
        const auto dry = synth_source(s.kind, s.band, scene.duration_s, s.seed, scene.sample_rate, s.fundamental_hz);
        const auto rir = render_foa_rir(scene.room, scene.pose.source_positions[i], scene.pose.receiver_position,
                                        scene.pose.receiver_yaw_deg, cfg);
        parts.push_back(render_foa(rir, dry));
    }
    if (parts.empty()) throw Error(ErrorKind::Input, "scene has no sources");
    return mix(parts);
}

}  // namespace foaground
