#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "foaground/eval_harness.hpp"
#include "support.hpp"

using namespace foaground;
using foaground::test::Gen;
using foaground::test::TempDir;

namespace {

std::vector<Prediction> ground_truth_answers(const std::vector<QaSample>& samples) {
    std::vector<Prediction> p;
    for (const auto& s : samples) p.push_back({s.id, s.answer});
    return p;
}

std::vector<QaSample> make_samples(Task task, int n, std::uint64_t seed0 = 100) {
    SamplePools pools;
    const GenConfig cfg;
    for (int i = 0; i < 6; ++i) pools.rooms.push_back({i, pool_room(7, i, cfg)});
    pools.seed_begin = 0;
    pools.seed_end = 1000;
    std::vector<QaSample> out;
    for (int i = 0; i < n; ++i) {
        auto s = make_sample(task, seed0 + static_cast<std::uint64_t>(i), cfg, pools).sample;
        s.id = to_string(task) + std::to_string(i);
        out.push_back(s);
    }
    return out;
}

VisualScene one_box_scene(double yaw, const Vec3& center, const Vec3& extents) {
    VisualScene s;
    s.room_dims = {6.0, 3.0, 6.0};
    s.camera = {{3.0, 1.5, 3.0}, yaw};
    s.loudspeakers.push_back({1, center, extents});
    return s;
}

EvalReport report_with(const std::string& split, std::optional<double> acc) {
    EvalReport r;
    r.task = "E";
    r.split = split;
    r.samples = 10;
    r.accuracy = acc;
    return r;
}

}  // namespace

TEST(LowerMedian, Examples) {
    EXPECT_EQ(lower_median({3.0}), 3.0);
    EXPECT_EQ(lower_median({4.0, 1.0, 3.0, 2.0}), 2.0);
    EXPECT_EQ(lower_median({5.0, 1.0, 3.0}), 3.0);
    EXPECT_ERROR_KIND(lower_median({}), ErrorKind::Evaluation);
}

TEST(EvalDoa, KnownErrors) {
    const std::vector<DoA> truth{{0, 0}, {0, 0}, {0, 0}};
    const std::vector<DoA> pred{{1, 0}, {2, 0}, {100, 0}};
    const auto st = eval_doa(pred, truth);
    EXPECT_NEAR(st.median_deg, 2.0, 1e-9);
    EXPECT_NEAR(st.mean_deg, 103.0 / 3.0, 1e-9);
    EXPECT_EQ(st.count, 3u);
}

TEST(EvalDoa, SelfComparisonIsZero) {
    Gen g(51);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<DoA> x(static_cast<std::size_t>(g.integer(1, 50)));
        for (auto& d : x) d = g.doa();
        const auto st = eval_doa(x, x);
        ASSERT_EQ(st.median_deg, 0.0);
        ASSERT_EQ(st.mean_deg, 0.0);
    }
}

TEST(EvalDoa, Errors) {
    const std::vector<DoA> one{{0, 0}};
    const std::vector<DoA> two{{0, 0}, {1, 1}};
    const std::vector<DoA> none;
    EXPECT_ERROR_KIND(eval_doa(one, two), ErrorKind::Alignment);
    EXPECT_ERROR_KIND(eval_doa(none, none), ErrorKind::Evaluation);
}

TEST(RandomBaseline, MedianNearNinety) {
    std::mt19937_64 rng(52);
    const std::size_t n = 200000;
    std::vector<DoA> a(n), b(n);
    std::size_t low_band = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = random_doa(rng);
        b[i] = random_doa(rng);
        if (std::abs(a[i].elevation_deg) < 30.0) ++low_band;
    }
    EXPECT_NEAR(eval_doa(a, b).median_deg, 90.0, 2.0);
    // Uniform on the sphere: |el| < 30 covers half the area.
    EXPECT_NEAR(static_cast<double>(low_band) / static_cast<double>(n), 0.5, 0.01);
}

TEST(GreedyMatch, PairsByDescendingIou) {
    const Box3D g0{"speaker", {0, 0, 0}, {1, 1, 1}};
    const Box3D g1{"speaker", {5, 0, 0}, {1, 1, 1}};
    const Box3D p_far{"speaker", {20, 0, 0}, {1, 1, 1}};
    const Box3D p_g0{"speaker", {0.1, 0, 0}, {1, 1, 1}};
    const Box3D p_g0_worse{"speaker", {0.4, 0, 0}, {1, 1, 1}};
    const auto m = greedy_match({p_far, p_g0_worse, p_g0}, {g0, g1});
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0], (std::pair<std::size_t, std::size_t>{2, 0}));
    EXPECT_TRUE(greedy_match({}, {g0}).empty());
}

TEST(EvalGrounding, PerfectAndDisjoint) {
    Gen g(53);
    std::vector<Box3D> boxes;
    for (int i = 0; i < 3; ++i) boxes.push_back(Box3D{"speaker", {4.0 * i, 0, 0}, g.vec(0.2, 1.0)});
    auto st = eval_grounding(boxes, boxes);
    EXPECT_NEAR(st.iou_mean, 1.0, 1e-12);
    EXPECT_NEAR(st.iou_median, 1.0, 1e-12);
    EXPECT_NEAR(*st.offset_mean_m, 0.0, 1e-12);
    EXPECT_EQ(st.unmatched, 0u);

    std::vector<Box3D> far = boxes;
    for (auto& b : far) b.center.y += 10.0;
    st = eval_grounding(far, boxes);
    EXPECT_EQ(st.iou_mean, 0.0);
    EXPECT_EQ(st.iou_median, 0.0);
    EXPECT_FALSE(st.offset_mean_m.has_value());
    EXPECT_EQ(st.unmatched, 3u);

    st = eval_grounding(std::vector<Box3D>{}, boxes);
    EXPECT_EQ(st.iou_mean, 0.0);
    EXPECT_EQ(st.ground_truths, 3u);
}

TEST(EvalGrounding, PartialMatchAveragesZeros) {
    const Box3D a{"speaker", {0, 0, 0}, {1, 1, 1}};
    const Box3D b{"speaker", {5, 0, 0}, {1, 1, 1}};
    const Box3D a_shift{"speaker", {0.5, 0, 0}, {1, 1, 1}};
    const auto st = eval_grounding({a_shift}, {a, b});
    EXPECT_NEAR(st.iou_mean, (1.0 / 3.0) / 2.0, 1e-12);
    EXPECT_EQ(st.iou_median, 0.0);
    EXPECT_NEAR(*st.offset_median_m, 0.5, 1e-12);
    EXPECT_EQ(st.matched, 1u);
}

TEST(EvalGrounding, Errors) {
    EXPECT_ERROR_KIND(eval_grounding(std::vector<Box3D>{}, std::vector<Box3D>{}), ErrorKind::Evaluation);
    EXPECT_ERROR_KIND(eval_grounding(std::vector<std::vector<Box3D>>{{}}, std::vector<std::vector<Box3D>>{}),
                      ErrorKind::Alignment);
}

TEST(BaselineGrounder, FrontalBoxWithTruePrior) {
    const Vec3 ext{0.35, 0.9, 0.35};
    const auto s = one_box_scene(0.0, {3.0, 1.2, 1.5}, ext);
    const auto out = render_depth(s);
    const Box3D gt = gt_box_camera(s, 1);
    const Box3D b = baseline_grounder(out.depth, out.mask, 1, ext);
    EXPECT_GE(iou3d(b, gt), 0.5);
    EXPECT_NEAR(b.max_corner().z, gt.max_corner().z, 1e-9);
    EXPECT_NEAR(b.extents.z, ext.z, 1e-9);
}

TEST(BaselineGrounder, TinyPriorGivesSurfaceBounds) {
    const auto s = one_box_scene(30.0, {2.0, 1.0, 1.5}, {0.5, 0.8, 0.4});
    const auto out = render_depth(s);
    const auto& k = s.intrinsics;
    Vec3 lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            if (out.mask.at(v, u) != 1) continue;
            const double d = out.depth.depth.at(v, u);
            const Vec3 p{(u - k.cx) * d / k.fx, -(v - k.cy) * d / k.fy, -d};
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
    }
    const Box3D b = baseline_grounder(out.depth, out.mask, 1, {1e-6, 1e-6, 1e-6});
    EXPECT_NEAR(b.min_corner().x, lo.x, 1e-9);
    EXPECT_NEAR(b.max_corner().x, hi.x, 1e-9);
    EXPECT_NEAR(b.min_corner().y, lo.y, 1e-9);
    EXPECT_NEAR(b.max_corner().y, hi.y, 1e-9);
    EXPECT_NEAR(b.min_corner().z, lo.z, 1e-9);
    EXPECT_NEAR(b.max_corner().z, hi.z, 1e-9);
}

TEST(BaselineGrounder, FrontFaceWithinPixelFootprint) {
    Gen g(54);
    int checked = 0;
    for (int trial = 0; trial < 80; ++trial) {
        const double yaw = g.uniform(-180.0, 180.0);
        // Box ahead of the camera at 1.2-2.5 m.
        const double dist = g.uniform(1.2, 2.5);
        const double az = g.uniform(-25.0, 25.0);
        const Vec3 ahead = rotate_yaw(dir_from_angles({az, 0.0}) * dist, yaw);
        const Vec3 ext{g.uniform(0.3, 0.4), g.uniform(0.75, 1.05), g.uniform(0.3, 0.4)};
        const Vec3 c{3.0 + ahead.x, g.uniform(0.6, 1.6), 3.0 + ahead.z};
        const auto s = one_box_scene(yaw, c, ext);
        const auto out = render_depth(s);
        if (visible_pixels(out.mask, 1) < 74) continue;
        const Box3D gt = gt_box_camera(s, 1);
        const Box3D b = baseline_grounder(out.depth, out.mask, 1, camera_frame_extents(ext, yaw));
        const double front = -gt.max_corner().z;
        const double footprint = front / s.intrinsics.fx;
        EXPECT_LE(std::abs(b.max_corner().z - gt.max_corner().z), footprint) << "trial " << trial;
        ++checked;
    }
    EXPECT_GT(checked, 40);
}

TEST(BaselineGrounder, Errors) {
    VisualScene s = one_box_scene(0.0, {3.0, 1.2, 1.5}, {0.35, 0.9, 0.35});
    s.loudspeakers.push_back({2, {3.0, 1.2, 0.5}, {0.2, 0.2, 0.2}});
    const auto out = render_depth(s);
    EXPECT_EQ(visible_pixels(out.mask, 2), 0u);
    EXPECT_ERROR_KIND(baseline_grounder(out.depth, out.mask, 2, {0.35, 0.9, 0.35}), ErrorKind::Grounding);
    EXPECT_ERROR_KIND(baseline_grounder(out.depth, out.mask, 1, {0.0, 0.9, 0.35}), ErrorKind::Config);
    InstanceMask small(10, 10, 0);
    EXPECT_ERROR_KIND(baseline_grounder(out.depth, small, 1, {0.35, 0.9, 0.35}), ErrorKind::Shape);
}

TEST(MatchSpeaker, PointsAtCandidate) {
    const std::vector<Candidate> c{{"Left", 1, {"speaker", {-1.0, 0.2, -2.0}, {0.3, 0.9, 0.3}}},
                                   {"Center", 2, {"speaker", {0.1, -0.1, -3.0}, {0.3, 0.9, 0.3}}},
                                   {"Right", 3, {"speaker", {1.5, 0.0, -2.0}, {0.3, 0.9, 0.3}}}};
    for (const auto& cand : c) EXPECT_EQ(match_speaker(angles_from_dir(cand.box.center), c), cand.label);
}

TEST(MatchSpeaker, TiesResolveInLabelOrder) {
    const Box3D left{"speaker", {-1.0, 0.0, -2.0}, {0.3, 0.3, 0.3}};
    const Box3D right{"speaker", {1.0, 0.0, -2.0}, {0.3, 0.3, 0.3}};
    const std::vector<Candidate> lr{{"Right", 2, right}, {"Left", 1, left}};
    EXPECT_EQ(match_speaker({0.0, 0.0}, lr), "Left");
    const std::vector<Candidate> cr{{"Right", 2, right}, {"Center", 1, left}};
    EXPECT_EQ(match_speaker({0.0, 0.0}, cr), "Center");
    EXPECT_ERROR_KIND(match_speaker({0.0, 0.0}, {}), ErrorKind::Input);
}

TEST(MatchSpeaker, InvariantToUniformScaling) {
    Gen g(55);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<Candidate> c;
        const auto labels = position_labels(static_cast<std::size_t>(g.integer(2, 3)));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            c.push_back({labels[i], static_cast<int>(i + 1), {"speaker", g.vec(-3.0, 3.0), {0.3, 0.9, 0.3}}});
        }
        auto scaled = c;
        for (auto& s : scaled) s.box.center = 3.7 * s.box.center;
        const DoA d = g.doa();
        ASSERT_EQ(match_speaker(d, c), match_speaker(d, scaled));
    }
}

TEST(LabelBoxes, OrdersByImageColumn) {
    const CameraIntrinsics k;
    const std::vector<std::pair<int, Box3D>> boxes{{7, {"speaker", {1.0, 0.0, -3.0}, {0.3, 0.9, 0.3}}},
                                                   {3, {"speaker", {-1.0, 0.0, -3.0}, {0.3, 0.9, 0.3}}},
                                                   {5, {"speaker", {0.0, 0.5, -2.0}, {0.3, 0.9, 0.3}}}};
    const auto c = label_boxes(boxes, k);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].id, 3);
    EXPECT_EQ(c[0].label, "Left");
    EXPECT_EQ(c[1].id, 5);
    EXPECT_EQ(c[1].label, "Center");
    EXPECT_EQ(c[2].id, 7);
    EXPECT_EQ(c[2].label, "Right");
}

TEST(ChanceRate, MeanOfInverseCandidateCounts) {
    QaSample two, three, other;
    two.task = Task::D;
    two.ground_truth.candidates.resize(2);
    three.task = Task::E;
    three.ground_truth.candidates.resize(3);
    other.task = Task::A;
    EXPECT_NEAR(chance_rate({two, three, other}), (0.5 + 1.0 / 3.0) / 2.0, 1e-12);
    EXPECT_ERROR_KIND(chance_rate({other}), ErrorKind::Evaluation);
}

TEST(EvaluateAnswers, GroundTruthAnswersScorePerfectly) {
    for (Task t : kAllTasks) {
        const auto samples = make_samples(t, 6);
        const auto r = evaluate_answers(samples, ground_truth_answers(samples), t, "x");
        EXPECT_EQ(r.samples, 6u);
        EXPECT_EQ(r.invalid_predictions, 0u);
        EXPECT_EQ(r.split, "x");
        if (t == Task::A || t == Task::B) {
            // Answers are rounded to whole degrees.
            EXPECT_LE(*r.doa_mean_deg, 0.71);
            EXPECT_FALSE(r.iou_mean.has_value());
        } else if (t == Task::C) {
            EXPECT_GE(*r.iou_mean, 0.9);
            EXPECT_LE(*r.offset_mean_m, 0.01);
            EXPECT_EQ(r.unmatched, 0u);
        } else {
            EXPECT_EQ(*r.accuracy, 1.0);
            EXPECT_GT(*r.chance_rate, 0.3);
            EXPECT_FALSE(r.doa_median_deg.has_value());
        }
    }
}

TEST(EvaluateAnswers, InvalidAnswersScoreAsWrong) {
    const auto a = make_samples(Task::A, 3);
    auto p = ground_truth_answers(a);
    p[0].answer_text = "somewhere to the left";
    const auto r = evaluate_answers(a, p, Task::A);
    EXPECT_EQ(r.invalid_predictions, 1u);
    EXPECT_NEAR(*r.doa_mean_deg, 180.0 / 3.0, 0.5);

    const auto d = make_samples(Task::D, 2);
    auto pd = ground_truth_answers(d);
    pd[1].answer_text = "left";
    const auto rd = evaluate_answers(d, pd, Task::D);
    EXPECT_EQ(rd.invalid_predictions, 1u);
    EXPECT_EQ(*rd.accuracy, 0.5);
}

TEST(EvaluateAnswers, MissingAndDuplicatePredictions) {
    const auto a = make_samples(Task::A, 3);
    auto p = ground_truth_answers(a);
    p.pop_back();
    try {
        evaluate_answers(a, p, Task::A);
        ADD_FAILURE() << "expected an alignment error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Alignment);
        EXPECT_NE(std::string(e.what()).find(a.back().id), std::string::npos) << e.what();
    }
    p = ground_truth_answers(a);
    p.push_back(p.front());
    EXPECT_ERROR_KIND(evaluate_answers(a, p, Task::A), ErrorKind::Alignment);
    EXPECT_ERROR_KIND(evaluate_answers(a, ground_truth_answers(a), Task::C), ErrorKind::Evaluation);
}

TEST(Predictions, FileRoundTrip) {
    TempDir dir;
    const std::vector<Prediction> p{{"a", "azimuth: 1; elevation: 2"}, {"b", "line one\nline two"}, {"c", ""}};
    write_predictions(p, dir / "p.jsonl");
    const auto back = read_predictions(dir / "p.jsonl");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].sample_id, p[i].sample_id);
        EXPECT_EQ(back[i].answer_text, p[i].answer_text);
    }
    {
        std::ofstream f(dir / "bad.jsonl");
        f << R"({"sample_id": "a", "answer_text": "x"})" << "\n" << R"({"sample_id": 3})" << "\n";
    }
    EXPECT_ERROR_KIND(read_predictions(dir / "bad.jsonl"), ErrorKind::Validation);
}

TEST(Pipeline, BandSelection) {
    QaSample s;
    s.question = "Where is the noise burst coming from?";
    PipelineConfig cfg;
    EXPECT_EQ(pipeline_band(s, cfg), cfg.noise_band);
    cfg.use_question_band = false;
    EXPECT_EQ(pipeline_band(s, cfg), std::nullopt);
    cfg.band = Band{100.0, 300.0};
    EXPECT_EQ(pipeline_band(s, cfg), cfg.band);
    s.question = "Where is the sound?";
    EXPECT_EQ(pipeline_band(s, PipelineConfig{}), std::nullopt);
}

TEST(Pipeline, ClassicalAnswersReasoningSamples) {
    const auto d = make_samples(Task::D, 10, 300);
    const PipelineConfig cfg;
    std::vector<Prediction> p;
    for (const auto& s : d) p.push_back({s.id, predict_answer(s, load_media(s, "/nonexistent"), cfg)});
    EXPECT_GE(*evaluate_answers(d, p, Task::D).accuracy, 0.8);
}

TEST(Pipeline, NeuralNeedsModel) {
    PipelineConfig cfg;
    cfg.method = DoaMethod::Neural;
    Gen g(56);
    const auto foa = foaground::test::plane_wave(g.noise(4000), {10.0, 5.0});
    EXPECT_ERROR_KIND(predict_doa(foa, std::nullopt, cfg), ErrorKind::Usage);
    NivConfig nc;
    nc.channel_width = 4;
    nc.mlp_hidden = 8;
    nc.embed_dim = 4;
    nc.target_band_input = true;
    const auto m = init_model(nc);
    cfg.model = &m;
    EXPECT_ERROR_KIND(predict_doa(foa, std::nullopt, cfg), ErrorKind::Usage);
    EXPECT_NO_THROW(predict_doa(foa, Band{200.0, 800.0}, cfg));
}

TEST(CrossEval, ShapeAndDeterminism) {
    NivConfig nc;
    nc.channel_width = 4;
    nc.mlp_hidden = 8;
    nc.embed_dim = 4;
    const auto single = init_model(nc);
    nc.target_band_input = true;
    nc.seed = 1;
    const auto overlap = init_model(nc);
    Gen g(57);
    std::array<std::vector<DoaCase>, 2> sets;
    for (auto& set : sets) {
        for (int i = 0; i < 5; ++i) {
            const DoA d = g.doa(60.0);
            set.push_back({foaground::test::plane_wave(g.noise(4000), d), d, Band{200.0, 800.0}});
        }
    }
    const auto a = cross_eval({&single, &overlap}, sets, 1);
    const auto b = cross_eval({&single, &overlap}, sets, 3);
    for (int m = 0; m < 2; ++m) {
        for (int t = 0; t < 2; ++t) {
            for (int e = 0; e < 2; ++e) {
                EXPECT_GE(a.median[m][t][e], 0.0);
                EXPECT_EQ(a.median[m][t][e], b.median[m][t][e]);
            }
        }
    }
    // Plane waves are recovered exactly by full-band classical IV.
    EXPECT_LT(a.median[0][0][0], 0.5);
    EXPECT_EQ(a.test_counts[0], 5u);
    const auto j = to_json(a);
    EXPECT_TRUE(j.at("median_angular_error_deg").at("neural").at("train_overlap").contains("test_single"));
    EXPECT_NE(to_text(a).find("test overlap"), std::string::npos);

    EXPECT_ERROR_KIND(cross_eval({&single, nullptr}, sets), ErrorKind::Config);
    EXPECT_ERROR_KIND(cross_eval({nullptr, &overlap}, sets), ErrorKind::Config);
    auto empty = sets;
    empty[1].clear();
    EXPECT_ERROR_KIND(cross_eval({&single, &overlap}, empty), ErrorKind::Config);
}

TEST(Ablation, SplitMismatchRejected) {
    EXPECT_ERROR_KIND(ablation_report({{"a", report_with("s1", 0.9)}, {"b", report_with("s2", 0.5)}}),
                      ErrorKind::Config);
    EXPECT_ERROR_KIND(ablation_report({{"a", report_with("s1", 0.9)}}), ErrorKind::Config);
    auto other = report_with("s1", 0.5);
    other.samples = 11;
    EXPECT_ERROR_KIND(ablation_report({{"a", report_with("s1", 0.9)}, {"b", other}}), ErrorKind::Config);
}

TEST(Ablation, IdenticalVariantsIdenticalRows) {
    const auto r = ablation_report({{"one", report_with("s", 0.8)}, {"two", report_with("s", 0.8)}});
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(to_json(r.rows[0].second), to_json(r.rows[1].second));
    const auto text = to_text(r);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(lines[1].substr(3), lines[2].substr(3));
    EXPECT_EQ(lines[0].size(), lines[1].size());
    EXPECT_EQ(to_json(r).at("variants").size(), 2u);
}

TEST(EvalReportText, ListsPresentMetricsOnly) {
    EvalReport r;
    r.task = "C";
    r.iou_mean = 0.5;
    r.iou_median = 0.25;
    r.offset_mean_m = 0.1;
    r.offset_median_m = 0.05;
    const auto text = to_text(r);
    EXPECT_NE(text.find("iou_median"), std::string::npos);
    EXPECT_NE(text.find("offset_mean_m"), std::string::npos);
    EXPECT_EQ(text.find("accuracy"), std::string::npos);
    const auto j = to_json(r);
    EXPECT_FALSE(j.contains("doa_median_deg"));
    EXPECT_EQ(j.at("iou_median").get<double>(), 0.25);
}
