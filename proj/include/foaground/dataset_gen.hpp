#pragma once

// Question/answer sample generation for five spatial tasks:
//   A  direction of a single source
//   B  direction of one of two overlapping sources, named by its kind
//   C  3D boxes of every visible loudspeaker
//   D  which visible loudspeaker is playing
//   E  which loudspeaker plays the named source while two play at once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "foaground/room_sim.hpp"
#include "foaground/scene_render.hpp"

namespace foaground {

enum class Task { A, B, C, D, E };
enum class Split { Train, Val, Test };

inline constexpr std::array<Task, 5> kAllTasks{Task::A, Task::B, Task::C, Task::D, Task::E};
inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Val, Split::Test};

std::string to_string(Task task);
std::string to_string(Split split);
Task task_from_string(std::string_view text);
Split split_from_string(std::string_view text);

bool task_has_audio(Task task);
bool task_has_visual(Task task);

// "azimuth: <int>; elevation: <int>", rounded half away from zero.
std::string format_doa_answer(const DoA& doa);
// Case-insensitive, any whitespace around tokens, integer degrees.
DoA parse_doa_answer(std::string_view text);

// Round to whole centimeters (half away from zero).
double quantize_cm(double meters);
Box3D quantize_box(const Box3D& box);

// "bbox_<k> = Bbox(<category>, x, y, z, sx, sy, sz)" with two decimals.
std::string format_bbox(int k, const Box3D& box);
std::pair<int, Box3D> parse_bbox(std::string_view text);
// One box per line, k = 0, 1, ...
std::string format_bboxes(const std::vector<Box3D>& boxes);
// Non-empty lines in order; k must be strictly increasing.
std::vector<Box3D> parse_bboxes(std::string_view text);

// Labels by ascending image column: 2 -> Left, Right; 3 -> Left, Center, Right.
std::vector<std::string> position_labels(std::size_t n);
int label_rank(std::string_view label);  // Left 0, Center 1, Right 2

std::string kind_phrase(SourceKind kind);
// Source kind named in a question, if any.
std::optional<SourceKind> kind_named_in(std::string_view question);

struct MediaRefs {
    std::optional<std::string> foa_wav;  // relative to the split directory
    std::optional<std::string> depth;    // stem, see write_depth_frame
    std::optional<std::string> mask;     // stem, see write_instance_mask

    friend bool operator==(const MediaRefs&, const MediaRefs&) = default;
};

struct Candidate {
    std::string label;
    int id = 0;
    Box3D box;  // camera frame

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct GroundTruth {
    std::optional<DoA> doa;             // A, B, D, E: target direction
    std::vector<Box3D> boxes;           // C, in loudspeaker id order
    std::optional<std::string> label;   // D, E
    std::vector<Candidate> candidates;  // D, E, in label order
    std::optional<SourceKind> target_kind;  // B, E
    std::optional<Band> target_band;        // B, E

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Scene record layout:
//   audio:  SceneDescription JSON (A, B, D, E)
//   visual: VisualScene JSON (C, D, E)
//   room_id, target_source (B, D, E), source_speakers (D, E)
struct QaSample {
    std::string id;
    Task task = Task::A;
    Split split = Split::Train;
    std::uint64_t seed = 0;
    std::string question;
    std::string answer;
    MediaRefs media;
    GroundTruth ground_truth;
    nlohmann::json scene;

    friend bool operator==(const QaSample&, const QaSample&) = default;
};

nlohmann::json to_json(const QaSample& sample);
QaSample sample_from_json(const nlohmann::json& j);

// Answer text derived from the ground truth alone.
std::string answer_from_ground_truth(Task task, const GroundTruth& gt);

struct GenConfig {
    double sample_rate = 16000.0;
    double duration_s = 0.5;
    int max_order = 3;
    double absorption = 0.7;
    Vec3 room_min{4.0, 2.6, 4.0};
    Vec3 room_max{8.0, 3.4, 8.0};
    CameraIntrinsics intrinsics;
    Band tone_band{200.0, 800.0};
    Band noise_band{2000.0, 6000.0};
    // Minimum angle between candidate loudspeaker directions (D, E).
    double min_candidate_separation_deg = 15.0;
    // Minimum horizontal gap between projected candidate centers (D, E).
    double min_candidate_gap_px = 8.0;
    int max_attempts = 2000;

    friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

void validate(const GenConfig& cfg);
nlohmann::json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {});

Band band_for(const GenConfig& cfg, SourceKind kind);

struct RoomPoolEntry {
    int room_id = 0;
    RoomSpec room;
};

// Where a sample may draw its room and its source seeds from.
struct SamplePools {
    std::vector<RoomPoolEntry> rooms;
    std::uint64_t seed_begin = 0;
    std::uint64_t seed_end = 1ULL << 32;
};

// Room parameters are a pure function of (dataset seed, room id).
RoomSpec pool_room(std::uint64_t dataset_seed, int room_id, const GenConfig& cfg);

struct GeneratedSample {
    QaSample sample;
    std::optional<FoaSignal> foa;
    std::optional<RenderOutput> visual;
};

// Builds a constraint-satisfying sample with a fresh rng seeded from `seed`.
GeneratedSample make_sample(Task task, std::uint64_t seed, const GenConfig& cfg, const SamplePools& pools);

// Media from the scene record alone.
FoaSignal render_sample_audio(const QaSample& sample);
RenderOutput render_sample_visual(const QaSample& sample, int threads = 1);

// Re-renders the scene and recomputes every answer-relevant quantity.
// Returns the list of violations; empty means valid.
std::vector<std::string> check_sample(const QaSample& sample);
void validate_sample(const QaSample& sample);

void write_jsonl(const std::vector<QaSample>& samples, const std::filesystem::path& path);
std::vector<QaSample> read_jsonl(const std::filesystem::path& path);

struct SplitSpec {
    Split split = Split::Train;
    std::map<Task, int> counts;
    int room_begin = 0;  // room ids [room_begin, room_end)
    int room_end = 0;
    std::uint64_t seed_begin = 0;  // source seeds [seed_begin, seed_end)
    std::uint64_t seed_end = 0;
};

struct DatasetSpec {
    std::uint64_t seed = 0;
    GenConfig gen;
    std::vector<SplitSpec> splits;

    // Task totals A:320 B:300 C:600 D:140 E:290 split 80/10/10.
    static DatasetSpec defaults(std::uint64_t seed = 0);
};

void validate(const DatasetSpec& spec);
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

// Seed of sample `index` of `task` in `split`.
std::uint64_t sample_seed(std::uint64_t dataset_seed, Split split, Task task, int index);

SamplePools split_pools(const DatasetSpec& spec, const SplitSpec& split);

// Writes <root>/<split>/{samples.jsonl, audio, depth, mask} and
// <root>/manifest.json; returns the manifest.
nlohmann::json gen_split(const DatasetSpec& spec, const std::filesystem::path& root, int threads = 1);

// Writes the media of one generated sample under split_dir and fills
// sample.media with the relative paths.
void write_sample_media(GeneratedSample& generated, const std::filesystem::path& split_dir);

}  // namespace foaground
