#include "foaground/dataset_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "foaground/hash.hpp"
#include "foaground/io_util.hpp"
#include "foaground/json_util.hpp"
#include "foaground/parallel.hpp"

namespace foaground {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Task task) { return std::string(1, static_cast<char>('A' + static_cast<int>(task))); }

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Task task_from_string(std::string_view text) {
    if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'E') return static_cast<Task>(text[0] - 'A');
    if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'e') return static_cast<Task>(text[0] - 'a');
    throw Error(ErrorKind::Parse, "unknown task '" + std::string(text) + "' (expected A-E)");
}

Split split_from_string(std::string_view text) {
    for (Split s : kAllSplits) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorKind::Parse, "unknown split '" + std::string(text) + "'");
}

bool task_has_audio(Task task) { return task != Task::C; }
bool task_has_visual(Task task) { return task == Task::C || task == Task::D || task == Task::E; }

namespace {

json doa_json(const DoA& d) { return {{"azimuth_deg", d.azimuth_deg}, {"elevation_deg", d.elevation_deg}}; }
DoA doa_from(const json& j) { return DoA::checked(j.at("azimuth_deg").get<double>(), j.at("elevation_deg").get<double>()); }

json box_json(const Box3D& b) {
    return {{"category", b.category}, {"center", vec_json(b.center)}, {"extents", vec_json(b.extents)}};
}

Box3D box_from(const json& j) {
    Box3D b{j.at("category").get<std::string>(), vec_from(j.at("center")), vec_from(j.at("extents"))};
    validate(b);
    return b;
}

json band_json(const Band& b) { return json::array({b.lo_hz, b.hi_hz}); }
Band band_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json gt_json(const GroundTruth& gt) {
    json j = json::object();
    if (gt.doa) j["doa"] = doa_json(*gt.doa);
    if (!gt.boxes.empty()) {
        j["boxes"] = json::array();
        for (const auto& b : gt.boxes) j["boxes"].push_back(box_json(b));
    }
    if (gt.label) j["label"] = *gt.label;
    if (!gt.candidates.empty()) {
        j["candidates"] = json::array();
        for (const auto& c : gt.candidates) j["candidates"].push_back({{"label", c.label}, {"id", c.id}, {"box", box_json(c.box)}});
    }
    if (gt.target_kind) j["target_kind"] = to_string(*gt.target_kind);
    if (gt.target_band) j["target_band"] = band_json(*gt.target_band);
    return j;
}

GroundTruth gt_from(const json& j) {
    GroundTruth gt;
    if (!j.is_object()) throw Error(ErrorKind::Validation, "ground_truth must be an object");
    if (j.contains("doa")) gt.doa = doa_from(j.at("doa"));
    if (j.contains("boxes")) {
        for (const auto& b : j.at("boxes")) gt.boxes.push_back(box_from(b));
    }
    if (j.contains("label")) gt.label = j.at("label").get<std::string>();
    if (j.contains("candidates")) {
        for (const auto& c : j.at("candidates")) {
            gt.candidates.push_back({c.at("label").get<std::string>(), c.at("id").get<int>(), box_from(c.at("box"))});
        }
    }
    if (j.contains("target_kind")) gt.target_kind = source_kind_from_string(j.at("target_kind").get<std::string>());
    if (j.contains("target_band")) gt.target_band = band_from(j.at("target_band"));
    return gt;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Question templates. {target} is a source kind phrase, {options} the
// allowed position labels.
const std::array<std::array<const char*, 5>, 5> kTemplates{{
    {"Where is the sound coming from? Give azimuth and elevation in degrees.",
     "Estimate the direction of the sound source relative to the listener.",
     "Report the azimuth and elevation of the only sound source.",
     "From which direction does the sound reach the microphone?",
     "Localize the sound source and state its azimuth and elevation."},
    {"Two sources are playing. Where is the {target}?",
     "Ignore the other sound and give the azimuth and elevation of the {target}.",
     "Find the direction of the {target} in this mixture.",
     "Which direction does the {target} come from? Answer with azimuth and elevation.",
     "Localize the {target} and report its azimuth and elevation."},
    {"Give a 3D bounding box for every speaker in view.",
     "Locate each loudspeaker in the camera frame as a 3D box.",
     "List the 3D boxes of all visible speakers.",
     "Where are the speakers? Return one bounding box per speaker.",
     "Detect the loudspeakers and output their 3D bounding boxes."},
    {"Which loudspeaker is playing the sound: {options}?",
     "The sound comes from one of the visible speakers. Which one is it ({options})?",
     "Match the audio to a loudspeaker. Answer {options}.",
     "Pick the speaker that emits the sound ({options}).",
     "Which of the speakers in view is active? Options: {options}."},
    {"Two sounds play at once. Which loudspeaker emits the {target} ({options})?",
     "Find the speaker playing the {target}. Answer {options}.",
     "Which visible speaker is the source of the {target}: {options}?",
     "Ignore the other sound. Where does the {target} come from ({options})?",
     "Match the {target} to one of the loudspeakers ({options})."},
}};

std::string fill_template(std::string text, const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
        text.replace(pos, key.size(), value);
    }
    return text;
}

std::string options_text(std::size_t n) {
    const auto labels = position_labels(n);
    return n == 2 ? labels[0] + " or " + labels[1] : labels[0] + ", " + labels[1] + " or " + labels[2];
}

std::string make_question(Task task, std::mt19937_64& rng, std::optional<SourceKind> target, std::size_t candidates) {
    std::uniform_int_distribution<int> pick(0, 4);
    std::string q = kTemplates[static_cast<std::size_t>(task)][static_cast<std::size_t>(pick(rng))];
    if (target) q = fill_template(q, "{target}", kind_phrase(*target));
    if (candidates > 0) q = fill_template(q, "{options}", options_text(candidates));
    return q;
}

bool bands_disjoint(const Band& a, const Band& b) { return a.hi_hz <= b.lo_hz || b.hi_hz <= a.lo_hz; }

struct VisualDraw {
    VisualScene scene;
    RenderOutput render;
};

bool boxes_apart(const Loudspeaker& a, const Loudspeaker& b, double gap) {
    const Vec3 d = a.center - b.center;
    const Vec3 s = 0.5 * (a.extents + b.extents);
    return std::abs(d.x) >= s.x + gap || std::abs(d.y) >= s.y + gap || std::abs(d.z) >= s.z + gap;
}

// Camera at head height inside the clearance box, loudspeakers placed in
// front of it so that their centers also satisfy the source constraints.
std::optional<VisualDraw> draw_visual(const RoomSpec& room, int n, std::mt19937_64& rng, const GenConfig& cfg,
                                      bool need_separation) {
    const auto& L = room.dims;
    const auto& k = cfg.intrinsics;
    std::uniform_real_distribution<double> ux(kWallClearance, L.x - kWallClearance);
    std::uniform_real_distribution<double> uy(std::max(kWallClearance, 1.0), std::min(L.y - kWallClearance, 1.8));
    std::uniform_real_distribution<double> uz(kWallClearance, L.z - kWallClearance);
    std::uniform_real_distribution<double> yaw(-180.0, 180.0);
    const double half_fov = rad2deg(std::atan((k.cx + 0.5) / k.fx));
    std::uniform_real_distribution<double> az(-0.8 * half_fov, 0.8 * half_fov);
    std::uniform_real_distribution<double> radius(1.2, 3.8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    VisualScene vs;
    vs.room_dims = L;
    vs.intrinsics = k;
    vs.camera = {{ux(rng), uy(rng), uz(rng)}, yaw(rng)};
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            Loudspeaker s;
            s.id = i + 1;
            s.extents = sample_loudspeaker_extents(rng);
            const double a = deg2rad(az(rng));
            const double r = radius(rng);
            const double y_lo = std::max(kWallClearance, 0.5 * s.extents.y + 0.02);
            const double y = y_lo + unit(rng) * std::max(0.0, 1.1 - y_lo);
            s.center = vs.camera.position + rotate_yaw({-r * std::sin(a), 0.0, -r * std::cos(a)}, vs.camera.yaw_deg);
            s.center.y = y;
            const Vec3 lo = s.center - 0.5 * s.extents;
            const Vec3 hi = s.center + 0.5 * s.extents;
            const double d = (s.center - vs.camera.position).norm();
            if (!inside_with_clearance(room, s.center) || lo.x < 0 || lo.y < 0 || lo.z < 0 || hi.x > L.x ||
                hi.y > L.y || hi.z > L.z || d < kMinSourceDistance || d > kMaxSourceDistance) {
                continue;
            }
            if (!std::all_of(vs.loudspeakers.begin(), vs.loudspeakers.end(),
                             [&](const Loudspeaker& o) { return boxes_apart(s, o, 0.1); })) {
                continue;
            }
            vs.loudspeakers.push_back(s);
            placed = true;
        }
        if (!placed) return std::nullopt;
    }
    if (need_separation) {
        std::vector<Vec3> dirs;
        std::vector<double> us;
        for (const auto& s : vs.loudspeakers) {
            const Vec3 c = world_to_camera(vs.camera, s.center);
            dirs.push_back(c * (1.0 / c.norm()));
            us.push_back(project(c, k).u);
        }
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            for (std::size_t j = i + 1; j < dirs.size(); ++j) {
                const double ang = rad2deg(std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0)));
                if (ang < cfg.min_candidate_separation_deg || std::abs(us[i] - us[j]) < cfg.min_candidate_gap_px) {
                    return std::nullopt;
                }
            }
        }
    }
    auto render = render_depth(vs);
    const auto threshold = static_cast<std::size_t>(scaled_visibility_threshold(k));
    for (const auto& s : vs.loudspeakers) {
        if (visible_pixels(render.mask, s.id) < threshold) return std::nullopt;
    }
    return VisualDraw{std::move(vs), std::move(render)};
}

// Candidates in label order (ascending projected column).
std::vector<Candidate> label_candidates(const VisualScene& vs) {
    std::vector<std::pair<double, int>> order;
    for (const auto& s : vs.loudspeakers) order.emplace_back(project(world_to_camera(vs.camera, s.center), vs.intrinsics).u, s.id);
    std::sort(order.begin(), order.end());
    const auto labels = position_labels(order.size());
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < order.size(); ++i) out.push_back({labels[i], order[i].second, gt_box_camera(vs, order[i].second)});
    return out;
}

}  // namespace

json to_json(const QaSample& s) {
    json media = json::object();
    if (s.media.foa_wav) media["foa_wav"] = *s.media.foa_wav;
    if (s.media.depth) media["depth"] = *s.media.depth;
    if (s.media.mask) media["mask"] = *s.media.mask;
    return {{"id", s.id},
            {"task", to_string(s.task)},
            {"split", to_string(s.split)},
            {"seed", s.seed},
            {"question", s.question},
            {"answer", s.answer},
            {"media", media},
            {"ground_truth", gt_json(s.ground_truth)},
            {"scene", s.scene}};
}

QaSample sample_from_json(const json& j) {
    try {
        if (!j.is_object()) throw Error(ErrorKind::Validation, "sample must be a JSON object");
        for (const char* key : {"id", "task", "split", "seed", "question", "answer", "media", "ground_truth", "scene"}) {
            if (!j.contains(key)) throw Error(ErrorKind::Validation, std::string("missing field '") + key + "'");
        }
        QaSample s;
        s.id = j.at("id").get<std::string>();
        if (s.id.empty()) throw Error(ErrorKind::Validation, "empty sample id");
        s.task = task_from_string(j.at("task").get<std::string>());
        s.split = split_from_string(j.at("split").get<std::string>());
        s.seed = j.at("seed").get<std::uint64_t>();
        s.question = j.at("question").get<std::string>();
        s.answer = j.at("answer").get<std::string>();
        const auto& m = j.at("media");
        if (!m.is_object()) throw Error(ErrorKind::Validation, "media must be an object");
        if (m.contains("foa_wav")) s.media.foa_wav = m.at("foa_wav").get<std::string>();
        if (m.contains("depth")) s.media.depth = m.at("depth").get<std::string>();
        if (m.contains("mask")) s.media.mask = m.at("mask").get<std::string>();
        s.ground_truth = gt_from(j.at("ground_truth"));
        s.scene = j.at("scene");
        if (!s.scene.is_object()) throw Error(ErrorKind::Validation, "scene must be an object");
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Validation) throw;
        throw Error(ErrorKind::Validation, e.what());
    }
}

std::string answer_from_ground_truth(Task task, const GroundTruth& gt) {
    switch (task) {
        case Task::A:
        case Task::B:
            if (!gt.doa) throw Error(ErrorKind::Validation, "ground truth lacks a direction");
            return format_doa_answer(*gt.doa);
        case Task::C:
            if (gt.boxes.empty()) throw Error(ErrorKind::Validation, "ground truth lacks boxes");
            return format_bboxes(gt.boxes);
        case Task::D:
        case Task::E:
            if (!gt.label) throw Error(ErrorKind::Validation, "ground truth lacks a label");
            return *gt.label;
    }
    return {};
}

void validate(const GenConfig& cfg) {
    if (!(cfg.sample_rate > 0.0)) throw Error(ErrorKind::Config, "sample rate must be positive");
    if (!(cfg.duration_s > 0.0)) throw Error(ErrorKind::Config, "duration must be positive");
    if (cfg.max_order < 0) throw Error(ErrorKind::Config, "reflection order must be nonnegative");
    if (!(cfg.absorption > 0.0 && cfg.absorption <= 1.0)) throw Error(ErrorKind::Config, "absorption must lie in (0, 1]");
    const auto& a = cfg.room_min;
    const auto& b = cfg.room_max;
    if (!(a.x <= b.x && a.y <= b.y && a.z <= b.z)) throw Error(ErrorKind::Config, "room_min exceeds room_max");
    if (!(a.x > 2 * kWallClearance && a.y > 2 * kWallClearance && a.z > 2 * kWallClearance)) {
        throw Error(ErrorKind::Config, "rooms must be larger than twice the wall clearance");
    }
    validate(cfg.intrinsics);
    for (const Band& band : {cfg.tone_band, cfg.noise_band}) {
        if (!(band.lo_hz > 0.0 && band.hi_hz > band.lo_hz && band.hi_hz <= cfg.sample_rate / 2)) {
            throw Error(ErrorKind::Config, "source bands must satisfy 0 < lo < hi <= Nyquist");
        }
    }
    if (!bands_disjoint(cfg.tone_band, cfg.noise_band)) throw Error(ErrorKind::Config, "tone and noise bands overlap");
    if (cfg.max_attempts <= 0) throw Error(ErrorKind::Config, "max_attempts must be positive");
}

json to_json(const GenConfig& c) {
    return {{"sample_rate", c.sample_rate},
            {"duration_s", c.duration_s},
            {"max_order", c.max_order},
            {"absorption", c.absorption},
            {"room_min", vec_json(c.room_min)},
            {"room_max", vec_json(c.room_max)},
            {"intrinsics", to_json(c.intrinsics)},
            {"tone_band", band_json(c.tone_band)},
            {"noise_band", band_json(c.noise_band)},
            {"min_candidate_separation_deg", c.min_candidate_separation_deg},
            {"min_candidate_gap_px", c.min_candidate_gap_px},
            {"max_attempts", c.max_attempts}};
}

GenConfig gen_config_from_json(const json& j, GenConfig c) {
    try {
        if (j.contains("sample_rate")) c.sample_rate = j.at("sample_rate").get<double>();
        if (j.contains("duration_s")) c.duration_s = j.at("duration_s").get<double>();
        if (j.contains("max_order")) c.max_order = j.at("max_order").get<int>();
        if (j.contains("absorption")) c.absorption = j.at("absorption").get<double>();
        if (j.contains("room_min")) c.room_min = vec_from(j.at("room_min"));
        if (j.contains("room_max")) c.room_max = vec_from(j.at("room_max"));
        if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
        if (j.contains("tone_band")) c.tone_band = band_from(j.at("tone_band"));
        if (j.contains("noise_band")) c.noise_band = band_from(j.at("noise_band"));
        if (j.contains("min_candidate_separation_deg")) {
            c.min_candidate_separation_deg = j.at("min_candidate_separation_deg").get<double>();
        }
        if (j.contains("min_candidate_gap_px")) c.min_candidate_gap_px = j.at("min_candidate_gap_px").get<double>();
        if (j.contains("max_attempts")) c.max_attempts = j.at("max_attempts").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad generation config: ") + e.what());
    }
    validate(c);
    return c;
}

Band band_for(const GenConfig& cfg, SourceKind kind) {
    return kind == SourceKind::HarmonicTone ? cfg.tone_band : cfg.noise_band;
}

RoomSpec pool_room(std::uint64_t dataset_seed, int room_id, const GenConfig& cfg) {
    std::mt19937_64 rng(splitmix64(splitmix64(dataset_seed) ^ static_cast<std::uint64_t>(room_id)));
    const auto draw = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const Vec3 dims{draw(cfg.room_min.x, cfg.room_max.x), draw(cfg.room_min.y, cfg.room_max.y),
                    draw(cfg.room_min.z, cfg.room_max.z)};
    return RoomSpec::uniform(dims, cfg.absorption, cfg.max_order);
}

GeneratedSample make_sample(Task task, std::uint64_t seed, const GenConfig& cfg, const SamplePools& pools) {
    validate(cfg);
    if (pools.rooms.empty()) throw Error(ErrorKind::Config, "empty room pool");
    if (pools.seed_end <= pools.seed_begin) throw Error(ErrorKind::Config, "empty source seed pool");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_room(0, pools.rooms.size() - 1);
    std::uniform_int_distribution<std::uint64_t> pick_seed(pools.seed_begin, pools.seed_end - 1);
    std::bernoulli_distribution coin(0.5);

    GeneratedSample out;
    QaSample& s = out.sample;
    s.task = task;
    s.seed = seed;
    const auto& entry = pools.rooms[pick_room(rng)];
    const RoomSpec& room = entry.room;
    s.scene = {{"room_id", entry.room_id}};

    SceneDescription audio;
    audio.room = room;
    audio.sample_rate = cfg.sample_rate;
    audio.duration_s = cfg.duration_s;
    const auto add_source = [&](SourceKind kind) {
        audio.sources.push_back({kind, band_for(cfg, kind), pick_seed(rng), std::nullopt});
    };

    switch (task) {
        case Task::A: {
            audio.pose = sample_scene(room, 1, rng);
            add_source(coin(rng) ? SourceKind::HarmonicTone : SourceKind::BandNoise);
            s.ground_truth.doa = receiver_doa(audio.pose.source_positions[0], audio.pose.receiver_position,
                                              audio.pose.receiver_yaw_deg);
            s.question = make_question(task, rng, std::nullopt, 0);
            break;
        }
        case Task::B: {
            audio.pose = sample_scene(room, 2, rng);
            const bool tone_first = coin(rng);
            add_source(tone_first ? SourceKind::HarmonicTone : SourceKind::BandNoise);
            add_source(tone_first ? SourceKind::BandNoise : SourceKind::HarmonicTone);
            const std::size_t target = coin(rng) ? 1 : 0;
            const auto kind = audio.sources[target].kind;
            s.ground_truth.doa = receiver_doa(audio.pose.source_positions[target], audio.pose.receiver_position,
                                              audio.pose.receiver_yaw_deg);
            s.ground_truth.target_kind = kind;
            s.ground_truth.target_band = audio.sources[target].band;
            s.scene["target_source"] = target;
            s.question = make_question(task, rng, kind, 0);
            break;
        }
        case Task::C:
        case Task::D:
        case Task::E: {
            const int n = task == Task::C ? std::uniform_int_distribution<int>(1, 3)(rng)
                                          : std::uniform_int_distribution<int>(2, 3)(rng);
            std::optional<VisualDraw> draw;
            for (int attempt = 0; attempt < cfg.max_attempts && !draw; ++attempt) {
                draw = draw_visual(room, n, rng, cfg, task != Task::C);
            }
            if (!draw) {
                throw Error(ErrorKind::Generation, "no feasible " + to_string(task) + " scene with " +
                                                       std::to_string(n) + " loudspeakers after " +
                                                       std::to_string(cfg.max_attempts) + " attempts");
            }
            const VisualScene& vs = draw->scene;
            s.scene["visual"] = to_json(vs);
            if (task == Task::C) {
                for (const auto& sp : vs.loudspeakers) s.ground_truth.boxes.push_back(gt_box_camera(vs, sp.id));
                s.question = make_question(task, rng, std::nullopt, 0);
                out.visual = std::move(draw->render);
                break;
            }
            const auto candidates = label_candidates(vs);
            const std::size_t n_sources = task == Task::D ? 1 : 2;
            std::vector<int> speaker_ids;
            for (const auto& sp : vs.loudspeakers) speaker_ids.push_back(sp.id);
            std::shuffle(speaker_ids.begin(), speaker_ids.end(), rng);
            speaker_ids.resize(n_sources);

            audio.pose.receiver_position = vs.camera.position;
            audio.pose.receiver_yaw_deg = vs.camera.yaw_deg;
            const bool tone_first = coin(rng);
            for (std::size_t i = 0; i < n_sources; ++i) {
                const auto& sp = *std::find_if(vs.loudspeakers.begin(), vs.loudspeakers.end(),
                                               [&](const Loudspeaker& l) { return l.id == speaker_ids[i]; });
                audio.pose.source_positions.push_back(sp.center);
                add_source((i == 0) == tone_first ? SourceKind::HarmonicTone : SourceKind::BandNoise);
            }
            const std::size_t target = n_sources == 2 && coin(rng) ? 1 : 0;
            const int target_id = speaker_ids[target];
            s.ground_truth.doa = receiver_doa(audio.pose.source_positions[target], audio.pose.receiver_position,
                                              audio.pose.receiver_yaw_deg);
            s.ground_truth.candidates = candidates;
            s.ground_truth.label = std::find_if(candidates.begin(), candidates.end(), [&](const Candidate& c) {
                                       return c.id == target_id;
                                   })->label;
            std::optional<SourceKind> named;
            if (task == Task::E) {
                named = audio.sources[target].kind;
                s.ground_truth.target_kind = named;
                s.ground_truth.target_band = audio.sources[target].band;
            }
            s.scene["target_source"] = target;
            s.scene["source_speakers"] = speaker_ids;
            s.question = make_question(task, rng, named, candidates.size());
            out.visual = std::move(draw->render);
            break;
        }
    }

    if (task_has_audio(task)) {
        if (const auto why = check_pose(room, audio.pose)) {
            throw Error(ErrorKind::Generation, "generated pose violates constraints: " + *why);
        }
        s.scene["audio"] = to_json(audio);
        out.foa = render_scene(audio);
    }
    s.answer = answer_from_ground_truth(task, s.ground_truth);
    return out;
}

FoaSignal render_sample_audio(const QaSample& sample) {
    if (!sample.scene.contains("audio")) throw Error(ErrorKind::Input, "sample " + sample.id + " has no audio scene");
    return render_scene(scene_from_json(sample.scene.at("audio")));
}

RenderOutput render_sample_visual(const QaSample& sample, int threads) {
    if (!sample.scene.contains("visual")) throw Error(ErrorKind::Input, "sample " + sample.id + " has no visual scene");
    return render_depth(visual_scene_from_json(sample.scene.at("visual")), threads);
}

std::vector<std::string> check_sample(const QaSample& s) {
    std::vector<std::string> problems;
    const auto fail = [&](const std::string& why) { problems.push_back(s.id + ": " + why); };
    try {
        const auto& gt = s.ground_truth;
        if (s.question.empty()) fail("empty question");
        if (answer_from_ground_truth(s.task, gt) != s.answer) fail("answer does not match the ground truth");

        std::optional<SceneDescription> audio;
        std::size_t target = 0;
        if (task_has_audio(s.task)) {
            audio = scene_from_json(s.scene.at("audio"));
            const std::size_t expected = (s.task == Task::B || s.task == Task::E) ? 2 : 1;
            if (audio->sources.size() != expected) fail("wrong number of sources");
            if (const auto why = check_pose(audio->room, audio->pose)) fail(*why);
            target = s.scene.value("target_source", std::size_t{0});
            if (target >= audio->sources.size()) throw Error(ErrorKind::Validation, "target_source out of range");
            const DoA truth = receiver_doa(audio->pose.source_positions[target], audio->pose.receiver_position,
                                           audio->pose.receiver_yaw_deg);
            if (!gt.doa || angular_error(*gt.doa, truth) > 1e-6) fail("ground-truth direction disagrees with the scene");
            if (expected == 2) {
                const auto& a = audio->sources[0];
                const auto& b = audio->sources[1];
                if (a.kind == b.kind) fail("overlapping sources share a kind");
                if (!bands_disjoint(a.band, b.band)) fail("source bands overlap");
                const auto& t = audio->sources[target];
                if (gt.target_kind != t.kind || gt.target_band != t.band) fail("target kind or band disagrees");
                if (kind_named_in(s.question) != t.kind) fail("question does not name the target kind");
            }
        }

        if (task_has_visual(s.task)) {
            const VisualScene vs = visual_scene_from_json(s.scene.at("visual"));
            const auto render = render_depth(vs);
            const auto threshold = static_cast<std::size_t>(scaled_visibility_threshold(vs.intrinsics));
            const std::size_t n = vs.loudspeakers.size();
            for (const auto& sp : vs.loudspeakers) {
                if (visible_pixels(render.mask, sp.id) < threshold) {
                    fail("loudspeaker " + std::to_string(sp.id) + " is below the visibility threshold");
                }
            }
            if (s.task == Task::C) {
                if (n < 1 || n > 3) fail("task C needs 1-3 loudspeakers");
                if (gt.boxes.size() != n) fail("box count differs from the loudspeaker count");
                for (std::size_t i = 0; i < std::min(n, gt.boxes.size()); ++i) {
                    const Box3D ref = gt_box_camera(vs, vs.loudspeakers[i].id);
                    if (center_offset(ref, gt.boxes[i]) > 1e-9 || (ref.extents - gt.boxes[i].extents).norm() > 1e-9) {
                        fail("box " + std::to_string(i) + " disagrees with the scene");
                    }
                }
            } else {
                if (n < 2 || n > 3) fail("tasks D/E need 2-3 candidate loudspeakers");
                if (audio->pose.receiver_position != vs.camera.position ||
                    audio->pose.receiver_yaw_deg != vs.camera.yaw_deg) {
                    fail("camera and receiver poses differ");
                }
                const auto ids = s.scene.at("source_speakers").get<std::vector<int>>();
                if (ids.size() != audio->sources.size()) throw Error(ErrorKind::Validation, "source_speakers size");
                // Rank every loudspeaker by its image column with an
                // independent pinhole computation.
                const double c = std::cos(deg2rad(vs.camera.yaw_deg));
                const double sn = std::sin(deg2rad(vs.camera.yaw_deg));
                std::vector<std::pair<double, int>> cols;
                for (const auto& sp : vs.loudspeakers) {
                    const Vec3 d = sp.center - vs.camera.position;
                    const double x = c * d.x - sn * d.z;
                    const double z = sn * d.x + c * d.z;
                    if (!(z < 0.0)) fail("loudspeaker behind the camera");
                    cols.emplace_back(vs.intrinsics.cx + vs.intrinsics.fx * x / -z, sp.id);
                }
                std::sort(cols.begin(), cols.end());
                const auto labels = position_labels(std::clamp<std::size_t>(n, 2, 3));
                std::optional<std::string> expected_label;
                for (std::size_t i = 0; i < cols.size() && i < labels.size(); ++i) {
                    if (cols[i].second == ids[target]) expected_label = labels[i];
                    if (i < gt.candidates.size() &&
                        (gt.candidates[i].id != cols[i].second || gt.candidates[i].label != labels[i])) {
                        fail("candidate order disagrees with the image columns");
                    }
                }
                if (gt.candidates.size() != n) fail("candidate list size differs from the loudspeaker count");
                if (!expected_label || gt.label != expected_label) fail("label disagrees with the image ordering");
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    const auto it = std::find_if(vs.loudspeakers.begin(), vs.loudspeakers.end(),
                                                 [&](const Loudspeaker& l) { return l.id == ids[i]; });
                    if (it == vs.loudspeakers.end() || it->center != audio->pose.source_positions[i]) {
                        fail("source " + std::to_string(i) + " is not at its loudspeaker center");
                    }
                }
            }
        }
    } catch (const std::exception& e) {
        fail(e.what());
    }
    return problems;
}

void validate_sample(const QaSample& sample) {
    const auto problems = check_sample(sample);
    if (problems.empty()) return;
    std::string msg = problems.front();
    for (std::size_t i = 1; i < problems.size(); ++i) msg += "; " + problems[i];
    throw Error(ErrorKind::Validation, msg);
}

void write_jsonl(const std::vector<QaSample>& samples, const fs::path& path) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    io::write_file(path, out);
}

std::vector<QaSample> read_jsonl(const fs::path& path) {
    const auto text = io::read_file(path);
    std::vector<QaSample> samples;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const std::string_view line(text.data() + start, nl - start);
        ++line_no;
        start = nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            samples.push_back(sample_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::Validation, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return samples;
}

DatasetSpec DatasetSpec::defaults(std::uint64_t seed) {
    DatasetSpec spec;
    spec.seed = seed;
    const std::map<Task, int> totals{{Task::A, 320}, {Task::B, 300}, {Task::C, 600}, {Task::D, 140}, {Task::E, 290}};
    SplitSpec train{Split::Train, {}, 0, 400, 0, 1ULL << 40};
    SplitSpec val{Split::Val, {}, 400, 450, 1ULL << 40, 2ULL << 40};
    SplitSpec test{Split::Test, {}, 450, 500, 2ULL << 40, 3ULL << 40};
    for (const auto& [task, total] : totals) {
        const int tenth = total / 10;
        train.counts[task] = total - 2 * tenth;
        val.counts[task] = tenth;
        test.counts[task] = tenth;
    }
    spec.splits = {train, val, test};
    return spec;
}

void validate(const DatasetSpec& spec) {
    validate(spec.gen);
    if (spec.splits.empty()) throw Error(ErrorKind::Config, "dataset spec has no splits");
    std::set<Split> seen;
    for (const auto& s : spec.splits) {
        if (!seen.insert(s.split).second) throw Error(ErrorKind::Config, "split " + to_string(s.split) + " listed twice");
        if (s.room_end <= s.room_begin || s.room_begin < 0) {
            throw Error(ErrorKind::Config, "split " + to_string(s.split) + " has an empty room pool");
        }
        if (s.seed_end <= s.seed_begin) throw Error(ErrorKind::Config, "split " + to_string(s.split) + " has an empty seed pool");
        for (const auto& [task, n] : s.counts) {
            if (n < 0) throw Error(ErrorKind::Config, "negative sample count");
        }
    }
    for (std::size_t i = 0; i < spec.splits.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.splits.size(); ++j) {
            const auto& a = spec.splits[i];
            const auto& b = spec.splits[j];
            const std::string pair = to_string(a.split) + " and " + to_string(b.split);
            if (a.room_begin < b.room_end && b.room_begin < a.room_end) {
                throw Error(ErrorKind::Config, "room pools of " + pair + " overlap");
            }
            if (a.seed_begin < b.seed_end && b.seed_begin < a.seed_end) {
                throw Error(ErrorKind::Config, "source seed pools of " + pair + " overlap");
            }
        }
    }
}

json to_json(const DatasetSpec& spec) {
    json splits = json::array();
    for (const auto& s : spec.splits) {
        json counts = json::object();
        for (const auto& [task, n] : s.counts) counts[to_string(task)] = n;
        splits.push_back({{"split", to_string(s.split)},
                          {"counts", counts},
                          {"rooms", json::array({s.room_begin, s.room_end})},
                          {"seeds", json::array({s.seed_begin, s.seed_end})}});
    }
    return {{"seed", spec.seed}, {"gen", to_json(spec.gen)}, {"splits", splits}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    DatasetSpec spec = DatasetSpec::defaults(j.value("seed", std::uint64_t{0}));
    try {
        if (j.contains("gen")) spec.gen = gen_config_from_json(j.at("gen"), spec.gen);
        if (j.contains("splits")) {
            std::vector<SplitSpec> splits;
            for (const auto& js : j.at("splits")) {
                const Split which = split_from_string(js.at("split").get<std::string>());
                SplitSpec s;
                for (const auto& d : spec.splits) {
                    if (d.split == which) s = d;
                }
                s.split = which;
                if (js.contains("counts")) {
                    s.counts.clear();
                    for (const auto& [key, n] : js.at("counts").items()) s.counts[task_from_string(key)] = n.get<int>();
                }
                if (js.contains("rooms")) {
                    s.room_begin = js.at("rooms").at(0).get<int>();
                    s.room_end = js.at("rooms").at(1).get<int>();
                }
                if (js.contains("seeds")) {
                    s.seed_begin = js.at("seeds").at(0).get<std::uint64_t>();
                    s.seed_end = js.at("seeds").at(1).get<std::uint64_t>();
                }
                splits.push_back(s);
            }
            spec.splits = splits;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad dataset spec: ") + e.what());
    }
    validate(spec);
    return spec;
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, Split split, Task task, int index) {
    std::uint64_t h = splitmix64(dataset_seed ^ 0x5EED5EED5EED5EEDULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(split));
    h = splitmix64(h ^ static_cast<std::uint64_t>(task));
    return splitmix64(h ^ static_cast<std::uint64_t>(index));
}

SamplePools split_pools(const DatasetSpec& spec, const SplitSpec& split) {
    SamplePools pools;
    for (int id = split.room_begin; id < split.room_end; ++id) pools.rooms.push_back({id, pool_room(spec.seed, id, spec.gen)});
    pools.seed_begin = split.seed_begin;
    pools.seed_end = split.seed_end;
    return pools;
}

void write_sample_media(GeneratedSample& g, const fs::path& split_dir) {
    auto& s = g.sample;
    if (g.foa) {
        s.media.foa_wav = "audio/" + s.id + ".wav";
        write_foa_wav(split_dir / *s.media.foa_wav, *g.foa);
    }
    if (g.visual) {
        s.media.depth = "depth/" + s.id;
        s.media.mask = "mask/" + s.id;
        write_depth_frame(split_dir / *s.media.depth, g.visual->depth);
        write_instance_mask(split_dir / *s.media.mask, g.visual->mask);
    }
}

json gen_split(const DatasetSpec& spec, const fs::path& root, int threads) {
    validate(spec);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + root.string() + ": " + ec.message());

    const json config = to_json(spec);
    json manifest{{"format", "foaground-dataset-1"},
                  {"seed", spec.seed},
                  {"config", config},
                  {"config_hash", sha256_hex(config.dump())},
                  {"splits", json::object()},
                  {"files", json::object()}};
    std::vector<std::string> files;

    for (const auto& split : spec.splits) {
        const std::string name = to_string(split.split);
        const fs::path dir = root / name;
        for (const char* sub : {"audio", "depth", "mask"}) {
            fs::create_directories(dir / sub, ec);
            if (ec) throw Error(ErrorKind::Io, "cannot create " + (dir / sub).string() + ": " + ec.message());
        }
        const SamplePools pools = split_pools(spec, split);

        std::vector<std::pair<Task, int>> jobs;
        json seeds = json::object();
        json counts = json::object();
        for (const auto& [task, n] : split.counts) {
            counts[to_string(task)] = n;
            json list = json::array();
            for (int i = 0; i < n; ++i) {
                jobs.emplace_back(task, i);
                list.push_back(sample_seed(spec.seed, split.split, task, i));
            }
            seeds[to_string(task)] = list;
        }

        std::vector<QaSample> samples(jobs.size());
        parallel_for(jobs.size(), threads, [&](std::size_t j) {
            const auto [task, i] = jobs[j];
            auto g = make_sample(task, sample_seed(spec.seed, split.split, task, i), spec.gen, pools);
            g.sample.split = split.split;
            char idx[16];
            std::snprintf(idx, sizeof(idx), "%05d", i);
            g.sample.id = name + "-" + to_string(task) + "-" + idx;
            write_sample_media(g, dir);
            validate_sample(g.sample);
            samples[j] = std::move(g.sample);
        });
        write_jsonl(samples, dir / "samples.jsonl");
        files.push_back(name + "/samples.jsonl");
        for (const auto& smp : samples) {
            if (smp.media.foa_wav) files.push_back(name + "/" + *smp.media.foa_wav);
            for (const auto& stem : {smp.media.depth, smp.media.mask}) {
                if (!stem) continue;
                files.push_back(name + "/" + *stem + ".json");
                files.push_back(name + "/" + *stem + ".bin");
            }
        }

        manifest["splits"][name] = {{"counts", counts},
                                    {"rooms", json::array({split.room_begin, split.room_end})},
                                    {"seeds", json::array({split.seed_begin, split.seed_end})},
                                    {"sample_seeds", seeds},
                                    {"samples", samples.size()}};
    }

    for (const auto& f : files) manifest["files"][f] = sha256_file(root / f);
    io::write_file(root / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

}  // namespace foaground
