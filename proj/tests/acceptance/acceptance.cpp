// Acceptance run: AC-1 .. AC-9, one PASS/FAIL line each on stdout.
// Details go to stderr; numbers, loss curves, models and the cross-eval
// matrix are archived under --out.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "../niv_gradcheck.hpp"
#include "foaground/dataset_gen.hpp"
#include "foaground/eval_harness.hpp"
#include "foaground/hash.hpp"
#include "foaground/parallel.hpp"

using namespace foaground;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_threads = 1;
fs::path g_out;
json g_summary = json::object();

// Every sample generated anywhere in the run goes through check_sample.
std::atomic<std::size_t> g_validated{0};
std::atomic<std::size_t> g_invalid{0};
std::mutex g_log_mutex;

void log(const std::string& line) {
    std::lock_guard lock(g_log_mutex);
    std::cerr << "  " << line << std::endl;
}

std::string fmt(double v, int decimals = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void validate_generated(const QaSample& s) {
    const auto problems = check_sample(s);
    ++g_validated;
    if (!problems.empty()) {
        ++g_invalid;
        log("validator: " + problems.front());
    }
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

constexpr std::uint64_t kSeed = 2024;

struct Pools {
    DatasetSpec spec;
    SamplePools train;
    SamplePools test;
};

Pools make_pools(const GenConfig& gen) {
    Pools p;
    p.spec = DatasetSpec::defaults(kSeed);
    p.spec.gen = gen;
    p.train = split_pools(p.spec, p.spec.splits[0]);
    p.test = split_pools(p.spec, p.spec.splits[2]);
    return p;
}

GenConfig anechoic() {
    GenConfig g;
    g.max_order = 0;
    return g;
}

// Calls fn(i, generated) for n fresh samples; samples are validated first.
void for_samples(Task task, std::size_t n, const GenConfig& gen, const SamplePools& pools, Split split,
                 const std::function<void(std::size_t, GeneratedSample&)>& fn, std::size_t first = 0) {
    parallel_for(n, g_threads, [&](std::size_t i) {
        const int index = static_cast<int>(first + i);
        auto g = make_sample(task, sample_seed(kSeed, split, task, index), gen, pools);
        g.sample.split = split;
        g.sample.id = to_string(split) + "-" + to_string(task) + "-" + std::to_string(index);
        validate_generated(g.sample);
        fn(i, g);
    });
}

FoaSignal crop(const FoaSignal& foa, double seconds, double fs_hz) {
    const auto n = std::min(foa.length(), static_cast<std::size_t>(std::llround(seconds * fs_hz)));
    FoaSignal out;
    for (std::size_t c = 0; c < 4; ++c) out.channels[c].assign(foa.channels[c].begin(), foa.channels[c].begin() + n);
    return out;
}

// Training clips like load_training_examples: task A for single, task B
// band-limited to the target for overlap, first `seconds` kept.
std::vector<TrainExample> training_clips(bool overlap, std::size_t n, const GenConfig& gen, const SamplePools& pools,
                                         Split split, double seconds) {
    std::vector<TrainExample> out(n);
    for_samples(overlap ? Task::B : Task::A, n, gen, pools, split, [&](std::size_t i, GeneratedSample& g) {
        const FoaSignal foa = overlap ? band_limit(*g.foa, *g.sample.ground_truth.target_band) : *g.foa;
        out[i] = {crop(foa, seconds, gen.sample_rate), *g.sample.ground_truth.doa};
    });
    return out;
}

std::vector<DoaCase> doa_cases(Task task, std::size_t n, const GenConfig& gen, const SamplePools& pools) {
    std::vector<DoaCase> out(n);
    for_samples(task, n, gen, pools, Split::Test, [&](std::size_t i, GeneratedSample& g) {
        const auto& gt = g.sample.ground_truth;
        const Band band =
            gt.target_band ? *gt.target_band : scene_from_json(g.sample.scene.at("audio")).sources.at(0).band;
        out[i] = {std::move(*g.foa), *gt.doa, band};
    });
    return out;
}

double median_neural_error(const NivModel& m, const std::vector<TrainExample>& clips) {
    std::vector<double> err(clips.size());
    parallel_for(clips.size(), g_threads,
                 [&](std::size_t i) { err[i] = angular_error(forward_doa(m, clips[i].foa), clips[i].target); });
    return lower_median(err);
}

struct Trained {
    NivModel model;
    std::vector<double> curve;
    double seconds = 0.0;
};

Trained train_model(const std::string& name, const NivConfig& nc, const std::vector<TrainExample>& clips) {
    TrainConfig tc;
    tc.seed = kSeed;
    tc.threads = g_threads;
    const auto t0 = std::chrono::steady_clock::now();
    auto result = train(init_model(nc), clips, tc, [&](int step, double loss) {
        if (step % 500 == 0) log(name + " step " + std::to_string(step) + " loss " + fmt(loss, 4) + " (" +
                                 fmt(seconds_since(t0), 0) + " s)");
    });
    Trained t{std::move(result.model), std::move(result.loss_curve), seconds_since(t0)};
    save_model(t.model, g_out / (name + ".niv"));
    std::ofstream csv(g_out / (name + ".loss.csv"));
    csv << "step,loss\n";
    for (std::size_t i = 0; i < t.curve.size(); ++i) csv << i + 1 << "," << t.curve[i] << "\n";
    return t;
}

// Means of consecutive 100-step blocks.
std::vector<double> block_means(const std::vector<double>& curve, std::size_t block = 100) {
    std::vector<double> out;
    for (std::size_t b = 0; b + block <= curve.size(); b += block) {
        double s = 0.0;
        for (std::size_t i = b; i < b + block; ++i) s += curve[i];
        out.push_back(s / static_cast<double>(block));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<double> g_anechoic_median;

Outcome ac1() {
    const std::size_t n = 500;
    const auto t0 = std::chrono::steady_clock::now();
    const auto pools = make_pools(anechoic());
    std::vector<double> err(n);
    for_samples(Task::A, n, anechoic(), pools.test, Split::Test, [&](std::size_t i, GeneratedSample& g) {
        err[i] = angular_error(estimate_doa_classical(*g.foa), *g.sample.ground_truth.doa);
    });
    const double med = lower_median(err);
    const double secs = seconds_since(t0);
    g_anechoic_median = med;
    g_summary["AC-1"] = {{"scenes", n}, {"median_deg", med}, {"seconds", secs}, {"threads", g_threads}};
    return {med <= 1.0, "anechoic task A, " + std::to_string(n) + " scenes: median " + fmt(med) + " deg (<= 1.0), " +
                            fmt(secs, 1) + " s"};
}

Outcome ac2() {
    const std::size_t n = 500;
    GenConfig reverb;
    reverb.max_order = 3;
    reverb.absorption = 0.7;
    const auto pools = make_pools(reverb);
    std::vector<double> err(n);
    for_samples(Task::A, n, reverb, pools.test, Split::Test, [&](std::size_t i, GeneratedSample& g) {
        err[i] = angular_error(estimate_doa_classical(*g.foa), *g.sample.ground_truth.doa);
    });
    const double med = lower_median(err);
    if (!g_anechoic_median) {
        const auto apools = make_pools(anechoic());
        std::vector<double> a(n);
        for_samples(Task::A, n, anechoic(), apools.test, Split::Test, [&](std::size_t i, GeneratedSample& g) {
            a[i] = angular_error(estimate_doa_classical(*g.foa), *g.sample.ground_truth.doa);
        });
        g_anechoic_median = lower_median(a);
    }
    g_summary["AC-2"] = {{"scenes", n}, {"anechoic_median_deg", *g_anechoic_median}, {"reverberant_median_deg", med}};
    return {med >= *g_anechoic_median && med <= 15.0,
            "order 3, absorption 0.7: median " + fmt(med) + " deg vs anechoic " + fmt(*g_anechoic_median) +
                " (needs anechoic <= x <= 15)"};
}

Outcome ac3() {
    const std::size_t n = 500;
    const auto pools = make_pools(anechoic());
    std::vector<double> err(n), unmasked(n);
    for_samples(Task::B, n, anechoic(), pools.test, Split::Test, [&](std::size_t i, GeneratedSample& g) {
        const auto& gt = g.sample.ground_truth;
        err[i] = angular_error(estimate_doa_classical(*g.foa, gt.target_band), *gt.doa);
        unmasked[i] = angular_error(estimate_doa_classical(*g.foa), *gt.doa);
    });
    const double med = lower_median(err);
    g_summary["AC-3"] = {{"scenes", n}, {"band_masked_median_deg", med}, {"full_band_median_deg", lower_median(unmasked)}};
    return {med <= 5.0, "anechoic task B, band-masked median " + fmt(med) + " deg (<= 5), full band " +
                            fmt(lower_median(unmasked)) + " deg"};
}

Outcome ac4() {
    const auto t0 = std::chrono::steady_clock::now();
    NivConfig nc;
    nc.channel_width = 8;
    nc.seed = 4;
    const auto model = init_model(nc);
    std::mt19937_64 rng(44);
    std::normal_distribution<double> gauss;
    std::vector<TrainExample> batch;
    for (int b = 0; b < 2; ++b) {
        FoaSignal foa;
        for (auto& ch : foa.channels) {
            ch.resize(4000);
            for (auto& v : ch) v = gauss(rng);
        }
        batch.push_back({foa, random_doa(rng)});
    }
    const auto checks = test::gradient_check(model, batch, 1e-3, 0);
    double worst = 0.0;
    std::string worst_name;
    std::size_t total = 0;
    json tensors = json::array();
    for (const auto& c : checks) {
        total += c.checked;
        tensors.push_back({{"tensor", c.name}, {"checked", c.checked}, {"max_rel_error", c.max_rel_error}});
        if (c.max_rel_error > worst) {
            worst = c.max_rel_error;
            worst_name = c.name;
        }
    }
    // Recheck outliers with a small step: a ReLU kink inside the +-1e-3
    // stencil shows up as disagreement that vanishes at 1e-6.
    std::size_t outliers = 0;
    double worst_small = 0.0;
    json outlier_list = json::array();
    const auto analytic = loss_and_grads(model, batch).grads;
    NivModel probe = model;
    for (std::size_t t = 0; t < checks.size(); ++t) {
        if (checks[t].max_rel_error <= 1e-3) continue;
        auto& data = probe.params[t].data;
        const auto fd = [&](std::size_t i, double h) {
            const double saved = data[i];
            data[i] = saved + h;
            const double up = batch_loss(probe, batch);
            data[i] = saved - h;
            const double down = batch_loss(probe, batch);
            data[i] = saved;
            return (up - down) / (2.0 * h);
        };
        const auto rel = [](double a, double n) {
            return std::abs(a - n) / std::max({std::abs(a), std::abs(n), test::kGradFloor});
        };
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double a = analytic[t][i];
            const double coarse = fd(i, 1e-3);
            if (rel(a, coarse) <= 1e-3) continue;
            const double fine = fd(i, 1e-6);
            ++outliers;
            worst_small = std::max(worst_small, rel(a, fine));
            outlier_list.push_back({{"tensor", checks[t].name}, {"index", i}, {"analytic", a},
                                    {"fd_1e-3", coarse}, {"fd_1e-6", fine}});
            log("AC-4 outlier " + checks[t].name + "[" + std::to_string(i) + "] analytic " + fmt(a, 6) +
                " fd(1e-3) " + fmt(coarse, 6) + " fd(1e-6) " + fmt(fine, 6));
        }
    }
    const double secs = seconds_since(t0);
    g_summary["AC-4"] = {{"coordinates", total}, {"max_rel_error", worst}, {"tensors", tensors},
                         {"outliers", outlier_list}, {"outlier_max_rel_error_step_1e-6", worst_small},
                         {"seconds", secs}};
    std::string detail = std::to_string(checks.size()) + " tensors, " + std::to_string(total) +
                         " coordinates at step 1e-3, max relative error " + fmt(worst, 6) + " (" + worst_name + "), " +
                         fmt(secs, 1) + " s";
    if (outliers) {
        detail += "; " + std::to_string(outliers) + " coordinates over 1e-3, all " +
                  (worst_small <= 1e-6 ? std::string("within ") + fmt(worst_small * 1e9, 2) + "e-9 at step 1e-6 (ReLU kink inside the stencil)"
                                       : std::string("still off at step 1e-6: ") + fmt(worst_small, 6));
    }
    return {worst <= 1e-3 && secs <= 300.0, detail};
}

Outcome ac5() {
    const auto pools = make_pools(anechoic());
    const auto t0 = std::chrono::steady_clock::now();
    const auto clips = training_clips(false, 2000, anechoic(), pools.train, Split::Train, 0.25);
    const auto held = training_clips(false, 300, anechoic(), pools.test, Split::Test, 0.25);
    log("AC-5 data ready in " + fmt(seconds_since(t0), 1) + " s");
    NivConfig nc;
    nc.seed = kSeed;
    const double untrained = median_neural_error(init_model(nc), held);
    const auto t = train_model("niv_single_anechoic", nc, clips);
    const double trained = median_neural_error(t.model, held);
    const auto blocks = block_means(t.curve);
    std::size_t rises = 0, first_rise = 0;
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        if (blocks[i] > blocks[i - 1]) {
            if (rises++ == 0) first_rise = i;
            worst_rise = std::max(worst_rise, blocks[i] - blocks[i - 1]);
        }
    }
    const double secs = seconds_since(t0);
    g_summary["AC-5"] = {{"train_clips", clips.size()},  {"held_out", held.size()},
                         {"untrained_median_deg", untrained}, {"trained_median_deg", trained},
                         {"block_means", blocks},         {"block_rises", rises},
                         {"train_seconds", t.seconds},    {"total_seconds", secs}};
    const bool pass = trained <= 10.0 && trained <= untrained / 5.0 && rises == 0 && secs <= 1800.0;
    return {pass, "held-out median " + fmt(trained, 2) + " deg (<= 10 and <= untrained " + fmt(untrained, 2) +
                      "/5), 100-step block means " + fmt(blocks.front(), 4) + " -> " + fmt(blocks.back(), 5) +
                      ", rising " + std::to_string(rises) + "x" +
                      (rises ? " from block " + std::to_string(first_rise) + " (max +" + fmt(worst_rise, 5) + ")" : "") +
                      ", " + fmt(secs, 0) + " s"};
}

Outcome ac6() {
    GenConfig reverb;  // dataset defaults: order 3, absorption 0.7
    const auto pools = make_pools(reverb);
    const auto t0 = std::chrono::steady_clock::now();
    NivConfig single_cfg;
    single_cfg.seed = kSeed;
    NivConfig overlap_cfg = single_cfg;
    overlap_cfg.target_band_input = true;
    Trained single, overlap;
    {
        const auto clips = training_clips(false, 2000, reverb, pools.train, Split::Train, 0.25);
        single = train_model("niv_single_reverb", single_cfg, clips);
    }
    {
        const auto clips = training_clips(true, 2000, reverb, pools.train, Split::Train, 0.25);
        overlap = train_model("niv_overlap_reverb", overlap_cfg, clips);
    }
    const std::array<std::vector<DoaCase>, 2> tests{doa_cases(Task::A, 300, reverb, pools.test),
                                                    doa_cases(Task::B, 300, reverb, pools.test)};
    const auto m = cross_eval({&single.model, &overlap.model}, tests, g_threads);
    const auto j = to_json(m);
    std::ofstream(g_out / "cross_eval.json") << j.dump(2) << "\n";
    std::ofstream(g_out / "cross_eval.txt") << to_text(m);
    std::cerr << to_text(m);
    const double neural = m.median[1][kOverlap][kOverlap];
    const double classical = m.median[0][kOverlap][kOverlap];
    g_summary["AC-6"] = {{"matrix", j}, {"seconds", seconds_since(t0)}};
    return {neural <= classical + 2.0, "matched overlap cell: neural " + fmt(neural, 2) + " deg vs band-masked classical " +
                                           fmt(classical, 2) + " + 2; matrix archived in cross_eval.json"};
}

Outcome ac7() {
    // Monte-Carlo IoU oracle.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
        const auto draw_box = [&] {
            return Box3D{"speaker", {u(rng), u(rng), u(rng)}, {0.2 + u(rng), 0.2 + u(rng), 0.2 + u(rng)}};
        };
        const Box3D a = draw_box(), b = draw_box();
        const Vec3 lo{std::min(a.min_corner().x, b.min_corner().x), std::min(a.min_corner().y, b.min_corner().y),
                      std::min(a.min_corner().z, b.min_corner().z)};
        const Vec3 hi{std::max(a.max_corner().x, b.max_corner().x), std::max(a.max_corner().y, b.max_corner().y),
                      std::max(a.max_corner().z, b.max_corner().z)};
        const auto inside = [](const Box3D& bx, const Vec3& p) {
            const Vec3 l = bx.min_corner(), h = bx.max_corner();
            return p.x >= l.x && p.x <= h.x && p.y >= l.y && p.y <= h.y && p.z >= l.z && p.z <= h.z;
        };
        long both = 0, either = 0;
        for (int s = 0; s < 200000; ++s) {
            const Vec3 p{lo.x + u(rng) * (hi.x - lo.x), lo.y + u(rng) * (hi.y - lo.y), lo.z + u(rng) * (hi.z - lo.z)};
            const bool ia = inside(a, p), ib = inside(b, p);
            both += ia && ib;
            either += ia || ib;
        }
        const double mc = either ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
        worst = std::max(worst, std::abs(mc - iou3d(a, b)));
    }

    // Grounder on unoccluded instances of generated task C frames.
    const GenConfig gen;
    const auto pools = make_pools(gen);
    std::vector<double> ious, offsets;
    std::mutex m;
    std::size_t first = 0;
    while (ious.size() < 200 && first < 2000) {
        const std::size_t batch = 100;
        for_samples(
            Task::C, batch, gen, pools.test, Split::Test,
            [&](std::size_t, GeneratedSample& g) {
                const auto vs = visual_scene_from_json(g.sample.scene.at("visual"));
                const Vec3 prior = camera_frame_extents(kLoudspeakerBaseExtents, vs.camera.yaw_deg);
                for (const auto& sp : vs.loudspeakers) {
                    VisualScene alone = vs;
                    alone.loudspeakers = {sp};
                    const auto solo = render_depth(alone);
                    if (visible_pixels(solo.mask, sp.id) != visible_pixels(g.visual->mask, sp.id)) continue;
                    const Box3D gt = gt_box_camera(vs, sp.id);
                    const Box3D pred = baseline_grounder(g.visual->depth, g.visual->mask, sp.id, prior);
                    std::lock_guard lock(m);
                    ious.push_back(iou3d(pred, gt));
                    offsets.push_back(center_offset(pred, gt));
                }
            },
            first);
        first += batch;
    }
    const double iou_med = lower_median(ious);
    const double off_med = lower_median(offsets);
    g_summary["AC-7"] = {{"mc_worst_abs_diff", worst},
                         {"instances", ious.size()},
                         {"iou_median", iou_med},
                         {"offset_median_m", off_med}};
    const bool pass = worst <= 0.01 && ious.size() >= 200 && off_med <= 0.25 && iou_med >= 0.4;
    return {pass, "Monte-Carlo IoU worst gap " + fmt(worst, 4) + " (<= 0.01); grounder on " +
                      std::to_string(ious.size()) + " unoccluded instances: median offset " + fmt(off_med) +
                      " m (<= 0.25), median IoU " + fmt(iou_med) + " (>= 0.4)"};
}

Outcome ac8() {
    const GenConfig gen;
    const auto pools = make_pools(gen);
    const std::size_t n = 500;
    std::array<std::vector<QaSample>, 2> samples;
    std::array<std::vector<Prediction>, 2> masked;
    std::vector<Prediction> unmasked(n);
    PipelineConfig with_band;
    PipelineConfig no_band;
    no_band.use_question_band = false;
    for (int t = 0; t < 2; ++t) {
        const Task task = t == 0 ? Task::D : Task::E;
        samples[static_cast<std::size_t>(t)].resize(n);
        masked[static_cast<std::size_t>(t)].resize(n);
        for_samples(task, n, gen, pools.test, Split::Test, [&](std::size_t i, GeneratedSample& g) {
            const SampleMedia media{g.foa, g.visual};
            masked[static_cast<std::size_t>(t)][i] = {g.sample.id, predict_answer(g.sample, media, with_band)};
            if (task == Task::E) unmasked[i] = {g.sample.id, predict_answer(g.sample, media, no_band)};
            g.sample.scene = json::object({{"dropped", true}});
            samples[static_cast<std::size_t>(t)][i] = std::move(g.sample);
        });
    }
    const auto d = evaluate_answers(samples[0], masked[0], Task::D, "test");
    const auto e = evaluate_answers(samples[1], masked[1], Task::E, "test");
    const auto e0 = evaluate_answers(samples[1], unmasked, Task::E, "test");
    const double chance = *e.chance_rate;
    const auto ablation = ablation_report({{"classical IV, band mask", e}, {"classical IV, no band mask", e0}});
    std::ofstream(g_out / "ablation_task_e.txt") << to_text(ablation);
    g_summary["AC-8"] = {{"task_d", to_json(d)}, {"task_e", to_json(e)}, {"task_e_no_mask", to_json(e0)}};
    const bool pass = *d.accuracy >= 0.95 && *e.accuracy >= 0.90 && std::abs(*e0.accuracy - chance) <= 0.10;
    return {pass, "D " + fmt(100.0 * *d.accuracy, 1) + "% (>= 95), E " + fmt(100.0 * *e.accuracy, 1) +
                      "% (>= 90), E without band mask " + fmt(100.0 * *e0.accuracy, 1) + "% vs chance " +
                      fmt(100.0 * chance, 1) + "% (within 10 points)"};
}

Outcome ac9() {
    std::vector<std::string> failures;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Projection round trips.
    const CameraIntrinsics k;
    double worst_proj = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 p{(u(rng) - 0.5) * 4.0, (u(rng) - 0.5) * 3.0, -(0.2 + 6.0 * u(rng))};
        const auto px = project(p, k);
        worst_proj = std::max(worst_proj, (backproject_pixel(px.u, px.v, -p.z, k) - p).norm());
        const double uu = u(rng) * (k.width - 1), vv = u(rng) * (k.height - 1), d = 0.2 + 6.0 * u(rng);
        const auto back = project(backproject_pixel(uu, vv, d, k), k);
        worst_proj = std::max({worst_proj, std::abs(back.u - uu), std::abs(back.v - vv)});
    }
    if (worst_proj > 1e-6) failures.push_back("projection round trip " + fmt(worst_proj, 9));

    // Direct-path delay.
    std::size_t delay_errors = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto room = RoomSpec::uniform({3.0 + 6.0 * u(rng), 2.5 + u(rng), 3.0 + 6.0 * u(rng)}, 0.7, i % 2 ? 3 : 0);
        std::mt19937_64 r(static_cast<std::uint64_t>(i));
        const auto pose = sample_scene(room, 1, r);
        const auto rir = render_foa_rir(room, pose.source_positions[0], pose.receiver_position, pose.receiver_yaw_deg);
        const double dist = (pose.source_positions[0] - pose.receiver_position).norm();
        const auto expected = static_cast<std::size_t>(std::llround(dist / room.speed_of_sound * 16000.0));
        const auto& w = rir.channels[kW];
        const auto first = static_cast<std::size_t>(
            std::find_if(w.begin(), w.end(), [](double v) { return v != 0.0; }) - w.begin());
        if (first != expected || std::abs(w[first] - 1.0 / dist) > 1e-12) ++delay_errors;
    }
    if (delay_errors) failures.push_back(std::to_string(delay_errors) + " direct-path delays off");

    // Answer grammars.
    std::size_t grammar_errors = 0;
    for (int i = 0; i < 10000; ++i) {
        const DoA d{360.0 * u(rng) - 180.0, 180.0 * u(rng) - 90.0};
        const auto text = format_doa_answer(d);
        if (format_doa_answer(parse_doa_answer(text)) != text) ++grammar_errors;
        const Box3D b{"speaker", {8.0 * u(rng) - 4.0, 4.0 * u(rng) - 2.0, -8.0 * u(rng)},
                      {0.01 + 2.0 * u(rng), 0.01 + 2.0 * u(rng), 0.01 + 2.0 * u(rng)}};
        const auto bt = format_bbox(i % 4, b);
        const auto [kk, back] = parse_bbox(bt);
        if (format_bbox(kk, back) != bt) ++grammar_errors;
    }
    if (grammar_errors) failures.push_back(std::to_string(grammar_errors) + " grammar round trips differ");

    // Bitwise reproducibility of manifests.
    auto spec = DatasetSpec::defaults(kSeed);
    for (auto& s : spec.splits) {
        s.counts = {{Task::A, 4}, {Task::B, 4}, {Task::C, 4}, {Task::D, 4}, {Task::E, 4}};
    }
    const fs::path d1 = g_out / "repro_a", d2 = g_out / "repro_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    gen_split(spec, d1, 1);
    gen_split(spec, d2, g_threads);
    const auto h1 = sha256_file(d1 / "manifest.json");
    const auto h2 = sha256_file(d2 / "manifest.json");
    if (h1 != h2) failures.push_back("manifests differ");
    std::size_t split_samples = 0;
    for (const char* name : {"train", "val", "test"}) {
        for (const auto& s : read_jsonl(d1 / name / "samples.jsonl")) {
            validate_generated(s);
            ++split_samples;
        }
    }
    fs::remove_all(d1);
    fs::remove_all(d2);

    // Bitwise reproducibility of checkpoints.
    const auto pools = make_pools(anechoic());
    const auto clips = training_clips(false, 32, anechoic(), pools.train, Split::Train, 0.25);
    NivConfig nc;
    nc.channel_width = 8;
    nc.seed = 3;
    TrainConfig tc;
    tc.steps = 30;
    tc.batch_size = 8;
    tc.seed = 3;
    tc.threads = 1;
    save_model(train(init_model(nc), clips, tc).model, g_out / "repro_1.niv");
    tc.threads = std::max(2, g_threads);
    save_model(train(init_model(nc), clips, tc).model, g_out / "repro_2.niv");
    const auto c1 = sha256_file(g_out / "repro_1.niv");
    const auto c2 = sha256_file(g_out / "repro_2.niv");
    if (c1 != c2) failures.push_back("checkpoints differ");
    fs::remove(g_out / "repro_1.niv");
    fs::remove(g_out / "repro_2.niv");

    if (g_invalid > 0) failures.push_back(std::to_string(g_invalid.load()) + " samples failed validation");
    g_summary["AC-9"] = {{"projection_worst", worst_proj}, {"delay_errors", delay_errors},
                         {"grammar_errors", grammar_errors}, {"manifest_sha256", h1},
                         {"checkpoint_sha256", c1},          {"validated_samples", g_validated.load()},
                         {"invalid_samples", g_invalid.load()}};
    std::string detail = "projection " + fmt(worst_proj * 1e9, 3) + "e-9, 1000 direct-path delays, 20000 grammar round trips, " +
                         std::to_string(g_validated.load()) + " samples validated (" + std::to_string(split_samples) +
                         " from gen_split), manifest and checkpoint hashes " + (h1 == h2 && c1 == c2 ? "match" : "differ");
    if (!failures.empty()) {
        detail += "; failures:";
        for (const auto& f : failures) detail += " " + f + ";";
    }
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria AC-1 .. AC-9", "foaground_acceptance"};
    std::string out = "acceptance_artifacts";
    std::string only;
    g_threads = default_threads();
    app.add_option("--out", out, "Artifact directory")->capture_default_str();
    app.add_option("--only", only, "Comma-separated criteria numbers, e.g. 1,4,9");
    app.add_option("--threads", g_threads, "Worker threads");
    CLI11_PARSE(app, argc, argv);
    g_threads = std::max(1, g_threads);
    g_out = out;
    fs::create_directories(g_out);

    std::set<int> selected;
    for (std::size_t i = 0; i < only.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(only[i]))) selected.insert(only[i] - '0');
    }
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, ac1}, {2, ac2}, {3, ac3}, {4, ac4}, {5, ac5}, {6, ac6}, {7, ac7}, {8, ac8}, {9, ac9}};

    int failed = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& [num, fn] : criteria) {
        if (!selected.empty() && !selected.contains(num)) continue;
        const std::string name = "AC-" + std::to_string(num);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        g_summary[name + "_result"] = {{"pass", o.pass}, {"detail", o.detail}, {"seconds", seconds_since(t0)}};
        std::cout << name << " " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
        std::ofstream(g_out / "acceptance.json") << g_summary.dump(2) << "\n";
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << " in "
              << fmt(seconds_since(start), 0) << " s" << std::endl;
    return failed ? 1 : 0;
}
