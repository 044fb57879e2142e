#pragma once

// Metrics, geometric baselines and report tables.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "foaground/dataset_gen.hpp"
#include "foaground/neural_iv.hpp"

namespace foaground {

// Lower median: element (n-1)/2 of the sorted values.
double lower_median(std::vector<double> values);

struct DoaStats {
    double median_deg = 0.0;
    double mean_deg = 0.0;
    std::size_t count = 0;
};

DoaStats eval_doa(std::span<const DoA> predictions, std::span<const DoA> ground_truths);

// Greedy assignment by descending IoU; pairs with zero overlap stay unmatched.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(const std::vector<Box3D>& predictions,
                                                              const std::vector<Box3D>& ground_truths);

struct GroundingStats {
    double iou_mean = 0.0;    // unmatched ground truths count as IoU 0
    double iou_median = 0.0;
    std::optional<double> offset_mean_m;    // matched pairs only
    std::optional<double> offset_median_m;
    std::size_t ground_truths = 0;
    std::size_t matched = 0;
    std::size_t unmatched = 0;
};

GroundingStats eval_grounding(const std::vector<Box3D>& predictions, const std::vector<Box3D>& ground_truths);
// Pools the matched pairs of many frames.
GroundingStats eval_grounding(const std::vector<std::vector<Box3D>>& predictions,
                              const std::vector<std::vector<Box3D>>& ground_truths);

// Box from the visible surface of one instance. The depth extent becomes
// max(observed, prior.z) measured back from the nearest surface point; the
// other axes keep the observed bounds. size_prior is in camera-frame axes.
Box3D baseline_grounder(const DepthFrame& depth, const InstanceMask& mask, int id, const Vec3& size_prior);

// Label whose box-center direction is closest to doa. Exact ties resolve to
// Left, then Center, then Right.
std::string match_speaker(const DoA& doa, const std::vector<Candidate>& candidates);

// Candidates from predicted boxes, labelled by ascending image column.
std::vector<Candidate> label_boxes(const std::vector<std::pair<int, Box3D>>& boxes, const CameraIntrinsics& k);

// Uniform random direction on the sphere.
DoA random_doa(std::mt19937_64& rng);

struct EvalReport {
    std::string task;
    std::string split;  // split identity, compared by ablation_report
    std::size_t samples = 0;
    std::size_t invalid_predictions = 0;
    std::optional<double> doa_median_deg;
    std::optional<double> doa_mean_deg;
    std::optional<double> iou_mean;
    std::optional<double> iou_median;
    std::optional<double> offset_mean_m;
    std::optional<double> offset_median_m;
    std::optional<double> accuracy;
    std::optional<double> chance_rate;
    std::size_t unmatched = 0;
    std::string config_hash;
};

nlohmann::json to_json(const EvalReport& report);
std::string to_text(const EvalReport& report);

// Mean over D/E samples of 1 / candidate count.
double chance_rate(const std::vector<QaSample>& samples);

struct Prediction {
    std::string sample_id;
    std::string answer_text;
};

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Scores answer texts against the samples of one task. Every sample needs a
// prediction; unparseable answers score as wrong (DoA error 180 degrees, no
// boxes, wrong label).
EvalReport evaluate_answers(const std::vector<QaSample>& samples, const std::vector<Prediction>& predictions,
                            Task task, const std::string& split_id = {});

enum class DoaMethod { Classical, Neural };

struct PipelineConfig {
    DoaMethod method = DoaMethod::Classical;
    const NivModel* model = nullptr;
    // Fixed band for every sample; otherwise the band of the source kind the
    // question names is used when use_question_band is set.
    std::optional<Band> band;
    bool use_question_band = true;
    Band tone_band{200.0, 800.0};
    Band noise_band{2000.0, 6000.0};
    Vec3 size_prior = kLoudspeakerBaseExtents;  // world-frame loudspeaker extents
};

// Band the pipeline masks with for this sample, if any.
std::optional<Band> pipeline_band(const QaSample& sample, const PipelineConfig& cfg);

DoA predict_doa(const FoaSignal& foa, const std::optional<Band>& band, const PipelineConfig& cfg);

struct SampleMedia {
    std::optional<FoaSignal> foa;
    std::optional<RenderOutput> visual;
};

// Loads media from split_dir when referenced, else re-renders the scene.
SampleMedia load_media(const QaSample& sample, const std::filesystem::path& split_dir);

// Answer text produced by the geometric pipeline for any task.
std::string predict_answer(const QaSample& sample, const SampleMedia& media, const PipelineConfig& cfg);

struct DoaCase {
    FoaSignal foa;
    DoA truth;
    Band target_band;
};

enum Regime : int { kSingle = 0, kOverlap = 1 };

struct CrossEvalMatrix {
    // median[method][train regime][test regime], method 0 classical, 1 neural
    std::array<std::array<std::array<double, 2>, 2>, 2> median{};
    std::array<std::size_t, 2> test_counts{};
};

nlohmann::json to_json(const CrossEvalMatrix& m);
std::string to_text(const CrossEvalMatrix& m);

// Classical "training regime" is its aggregation: full band for single,
// target-band mask for overlap. Neural uses the model trained on each
// regime; models with target_band_input see band-limited clips.
CrossEvalMatrix cross_eval(const std::array<const NivModel*, 2>& models,
                           const std::array<std::vector<DoaCase>, 2>& test_sets, int threads = 1);

struct AblationReport {
    std::string split;
    std::vector<std::pair<std::string, EvalReport>> rows;
};

AblationReport ablation_report(const std::vector<std::pair<std::string, EvalReport>>& variants);
nlohmann::json to_json(const AblationReport& r);
std::string to_text(const AblationReport& r);

}  // namespace foaground
