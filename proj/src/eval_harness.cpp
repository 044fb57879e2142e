#include "foaground/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "foaground/io_util.hpp"
#include "foaground/parallel.hpp"

namespace foaground {

namespace fs = std::filesystem;
using nlohmann::json;

double lower_median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorKind::Evaluation, "median of an empty set");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = false) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

}  // namespace

DoaStats eval_doa(std::span<const DoA> predictions, std::span<const DoA> ground_truths) {
    if (predictions.size() != ground_truths.size()) {
        throw Error(ErrorKind::Alignment, std::to_string(predictions.size()) + " predictions for " +
                                              std::to_string(ground_truths.size()) + " ground truths");
    }
    if (predictions.empty()) throw Error(ErrorKind::Evaluation, "no predictions to evaluate");
    std::vector<double> errors(predictions.size());
    for (std::size_t i = 0; i < errors.size(); ++i) errors[i] = angular_error(predictions[i], ground_truths[i]);
    return {lower_median(errors), mean_of(errors), errors.size()};
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_match(const std::vector<Box3D>& predictions,
                                                              const std::vector<Box3D>& ground_truths) {
    struct Pair {
        double iou;
        std::size_t p, g;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < predictions.size(); ++p) {
        for (std::size_t g = 0; g < ground_truths.size(); ++g) {
            const double iou = iou3d(predictions[p], ground_truths[g]);
            if (iou > 0.0) pairs.push_back({iou, p, g});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
    std::vector<bool> used_p(predictions.size()), used_g(ground_truths.size());
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& pr : pairs) {
        if (used_p[pr.p] || used_g[pr.g]) continue;
        used_p[pr.p] = used_g[pr.g] = true;
        out.emplace_back(pr.p, pr.g);
    }
    return out;
}

GroundingStats eval_grounding(const std::vector<std::vector<Box3D>>& predictions,
                              const std::vector<std::vector<Box3D>>& ground_truths) {
    if (predictions.size() != ground_truths.size()) {
        throw Error(ErrorKind::Alignment, "prediction and ground-truth frame counts differ");
    }
    std::vector<double> ious;
    std::vector<double> offsets;
    GroundingStats st;
    for (std::size_t f = 0; f < ground_truths.size(); ++f) {
        const auto& gt = ground_truths[f];
        const auto matches = greedy_match(predictions[f], gt);
        for (const auto& [p, g] : matches) {
            ious.push_back(iou3d(predictions[f][p], gt[g]));
            offsets.push_back(center_offset(predictions[f][p], gt[g]));
        }
        st.ground_truths += gt.size();
        st.matched += matches.size();
        for (std::size_t i = matches.size(); i < gt.size(); ++i) ious.push_back(0.0);
    }
    if (st.ground_truths == 0) throw Error(ErrorKind::Evaluation, "no ground-truth boxes");
    st.unmatched = st.ground_truths - st.matched;
    st.iou_mean = mean_of(ious);
    st.iou_median = lower_median(ious);
    if (!offsets.empty()) {
        st.offset_mean_m = mean_of(offsets);
        st.offset_median_m = lower_median(offsets);
    }
    return st;
}

GroundingStats eval_grounding(const std::vector<Box3D>& predictions, const std::vector<Box3D>& ground_truths) {
    return eval_grounding(std::vector<std::vector<Box3D>>{predictions}, std::vector<std::vector<Box3D>>{ground_truths});
}

Box3D baseline_grounder(const DepthFrame& depth, const InstanceMask& mask, int id, const Vec3& size_prior) {
    const auto& k = depth.intrinsics;
    if (mask.height != k.height || mask.width != k.width || depth.depth.height != k.height ||
        depth.depth.width != k.width) {
        throw Error(ErrorKind::Shape, "depth and mask rasters differ in size");
    }
    if (!(size_prior.x > 0.0 && size_prior.y > 0.0 && size_prior.z > 0.0)) {
        throw Error(ErrorKind::Config, "size prior must be positive");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Vec3 lo{kInf, kInf, kInf};
    Vec3 hi{-kInf, -kInf, -kInf};
    long count = 0;
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const double d = depth.depth.at(v, u);
            if (mask.at(v, u) != id || !(d > 0.0)) continue;
            const Vec3 p = backproject_pixel(u, v, d, k);
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
            ++count;
        }
    }
    const int threshold = scaled_visibility_threshold(k);
    if (count < threshold || count == 0) {
        throw Error(ErrorKind::Grounding, "instance " + std::to_string(id) + " has " + std::to_string(count) +
                                              " pixels, below the threshold of " + std::to_string(threshold));
    }
    constexpr double kMinExtent = 1e-3;
    const double sz = std::max(hi.z - lo.z, size_prior.z);
    Box3D box;
    box.center = {0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), hi.z - 0.5 * sz};
    box.extents = {std::max(hi.x - lo.x, kMinExtent), std::max(hi.y - lo.y, kMinExtent), std::max(sz, kMinExtent)};
    return box;
}

std::string match_speaker(const DoA& doa, const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw Error(ErrorKind::Input, "no candidate loudspeakers");
    std::vector<const Candidate*> ordered;
    for (const auto& c : candidates) ordered.push_back(&c);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Candidate* a, const Candidate* b) { return label_rank(a->label) < label_rank(b->label); });
    const std::string* best = nullptr;
    double best_err = std::numeric_limits<double>::infinity();
    for (const Candidate* c : ordered) {
        const double err = angular_error(doa, angles_from_dir(c->box.center));
        if (err < best_err) {
            best_err = err;
            best = &c->label;
        }
    }
    return *best;
}

std::vector<Candidate> label_boxes(const std::vector<std::pair<int, Box3D>>& boxes, const CameraIntrinsics& k) {
    std::vector<std::pair<double, std::size_t>> cols;
    for (std::size_t i = 0; i < boxes.size(); ++i) cols.emplace_back(project(boxes[i].second.center, k).u, i);
    std::sort(cols.begin(), cols.end());
    const auto labels = position_labels(boxes.size());
    std::vector<Candidate> out;
    for (std::size_t r = 0; r < cols.size(); ++r) {
        const auto& [id, box] = boxes[cols[r].second];
        out.push_back({labels[r], id, box});
    }
    return out;
}

DoA random_doa(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    while (true) {
        const Vec3 v{g(rng), g(rng), g(rng)};
        if (v.norm() > 1e-12) return angles_from_dir(v);
    }
}

json to_json(const EvalReport& r) {
    json j{{"task", r.task},
           {"split", r.split},
           {"samples", r.samples},
           {"invalid_predictions", r.invalid_predictions},
           {"config_hash", r.config_hash}};
    const auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("doa_median_deg", r.doa_median_deg);
    put("doa_mean_deg", r.doa_mean_deg);
    put("iou_mean", r.iou_mean);
    put("iou_median", r.iou_median);
    put("offset_mean_m", r.offset_mean_m);
    put("offset_median_m", r.offset_median_m);
    put("accuracy", r.accuracy);
    put("chance_rate", r.chance_rate);
    if (r.iou_mean) j["unmatched"] = r.unmatched;
    return j;
}

std::string to_text(const EvalReport& r) {
    std::string out = "task " + r.task + "  split " + r.split + "  samples " + std::to_string(r.samples) + "\n";
    const auto line = [&](const char* name, const std::optional<double>& v, int decimals) {
        if (v) out += "  " + pad(name, 18) + pad(fixed(*v, decimals), 10, true) + "\n";
    };
    line("doa_median_deg", r.doa_median_deg, 2);
    line("doa_mean_deg", r.doa_mean_deg, 2);
    line("iou_mean", r.iou_mean, 3);
    line("iou_median", r.iou_median, 3);
    line("offset_mean_m", r.offset_mean_m, 3);
    line("offset_median_m", r.offset_median_m, 3);
    line("accuracy", r.accuracy, 4);
    line("chance_rate", r.chance_rate, 4);
    if (r.invalid_predictions > 0) out += "  invalid predictions: " + std::to_string(r.invalid_predictions) + "\n";
    if (r.iou_mean && r.unmatched > 0) out += "  unmatched ground truths: " + std::to_string(r.unmatched) + "\n";
    return out;
}

double chance_rate(const std::vector<QaSample>& samples) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.task != Task::D && s.task != Task::E) continue;
        if (s.ground_truth.candidates.empty()) throw Error(ErrorKind::Evaluation, s.id + " lists no candidates");
        sum += 1.0 / static_cast<double>(s.ground_truth.candidates.size());
        ++n;
    }
    if (n == 0) throw Error(ErrorKind::Evaluation, "no reasoning samples to compute a chance rate");
    return sum / static_cast<double>(n);
}

void write_predictions(const std::vector<Prediction>& predictions, const fs::path& path) {
    std::string out;
    for (const auto& p : predictions) out += json{{"sample_id", p.sample_id}, {"answer_text", p.answer_text}}.dump() + "\n";
    io::write_file(path, out);
}

std::vector<Prediction> read_predictions(const fs::path& path) {
    const auto text = io::read_file(path);
    std::vector<Prediction> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const std::string_view line(text.data() + start, nl - start);
        start = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("sample_id").get<std::string>(), j.at("answer_text").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Validation, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

EvalReport evaluate_answers(const std::vector<QaSample>& samples, const std::vector<Prediction>& predictions, Task task,
                            const std::string& split_id) {
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) {
        if (!by_id.emplace(p.sample_id, &p).second) {
            throw Error(ErrorKind::Alignment, "duplicate prediction for sample " + p.sample_id);
        }
    }
    EvalReport r;
    r.task = to_string(task);
    r.split = split_id;
    std::vector<DoA> pred_doa, true_doa;
    std::vector<std::vector<Box3D>> pred_boxes, true_boxes;
    std::size_t correct = 0;
    std::vector<QaSample> selected;
    for (const auto& s : samples) {
        if (s.task != task) continue;
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) throw Error(ErrorKind::Alignment, "no prediction for sample " + s.id);
        const std::string& text = it->second->answer_text;
        ++r.samples;
        selected.push_back(s);
        switch (task) {
            case Task::A:
            case Task::B: {
                const DoA truth = *s.ground_truth.doa;
                DoA pred;
                try {
                    pred = parse_doa_answer(text);
                } catch (const Error&) {
                    ++r.invalid_predictions;
                    pred = angles_from_dir(-dir_from_angles(truth));
                }
                pred_doa.push_back(pred);
                true_doa.push_back(truth);
                break;
            }
            case Task::C: {
                std::vector<Box3D> boxes;
                try {
                    boxes = parse_bboxes(text);
                } catch (const Error&) {
                    ++r.invalid_predictions;
                }
                pred_boxes.push_back(boxes);
                true_boxes.push_back(s.ground_truth.boxes);
                break;
            }
            case Task::D:
            case Task::E: {
                const bool known = text == "Left" || text == "Center" || text == "Right";
                if (!known) ++r.invalid_predictions;
                if (known && s.ground_truth.label == text) ++correct;
                break;
            }
        }
    }
    if (r.samples == 0) throw Error(ErrorKind::Evaluation, "no task " + r.task + " samples to evaluate");
    if (task == Task::A || task == Task::B) {
        const auto st = eval_doa(pred_doa, true_doa);
        r.doa_median_deg = st.median_deg;
        r.doa_mean_deg = st.mean_deg;
    } else if (task == Task::C) {
        const auto st = eval_grounding(pred_boxes, true_boxes);
        r.iou_mean = st.iou_mean;
        r.iou_median = st.iou_median;
        r.offset_mean_m = st.offset_mean_m;
        r.offset_median_m = st.offset_median_m;
        r.unmatched = st.unmatched;
    } else {
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
        r.chance_rate = chance_rate(selected);
    }
    return r;
}

std::optional<Band> pipeline_band(const QaSample& sample, const PipelineConfig& cfg) {
    if (cfg.band) return cfg.band;
    if (!cfg.use_question_band) return std::nullopt;
    if (const auto kind = kind_named_in(sample.question)) {
        return *kind == SourceKind::HarmonicTone ? cfg.tone_band : cfg.noise_band;
    }
    return std::nullopt;
}

DoA predict_doa(const FoaSignal& foa, const std::optional<Band>& band, const PipelineConfig& cfg) {
    if (cfg.method == DoaMethod::Classical) return estimate_doa_classical(foa, band);
    if (!cfg.model) throw Error(ErrorKind::Usage, "the neural method needs a model checkpoint");
    if (cfg.model->config.target_band_input) {
        if (!band) throw Error(ErrorKind::Usage, "this model expects a target band");
        return forward_doa(*cfg.model, band_limit(foa, *band));
    }
    return forward_doa(*cfg.model, foa);
}

SampleMedia load_media(const QaSample& sample, const fs::path& split_dir) {
    SampleMedia m;
    if (task_has_audio(sample.task)) {
        if (sample.media.foa_wav && fs::exists(split_dir / *sample.media.foa_wav)) {
            m.foa = read_foa_wav(split_dir / *sample.media.foa_wav);
        } else {
            m.foa = render_sample_audio(sample);
        }
    }
    if (task_has_visual(sample.task)) {
        if (sample.media.depth && sample.media.mask) {
            m.visual = RenderOutput{read_depth_frame(split_dir / *sample.media.depth),
                                    read_instance_mask(split_dir / *sample.media.mask)};
        } else {
            m.visual = render_sample_visual(sample);
        }
    }
    return m;
}

namespace {

std::vector<std::pair<int, Box3D>> ground_all(const QaSample& sample, const RenderOutput& visual,
                                              const PipelineConfig& cfg) {
    double yaw = 0.0;
    if (sample.scene.contains("visual")) yaw = sample.scene.at("visual").at("camera").value("yaw_deg", 0.0);
    const Vec3 prior = camera_frame_extents(cfg.size_prior, yaw);
    std::set<int> ids;
    for (auto id : visual.mask.data) {
        if (id != 0) ids.insert(id);
    }
    std::vector<std::pair<int, Box3D>> boxes;
    for (int id : ids) {
        try {
            boxes.emplace_back(id, baseline_grounder(visual.depth, visual.mask, id, prior));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Grounding) throw;
        }
    }
    return boxes;
}

}  // namespace

std::string predict_answer(const QaSample& sample, const SampleMedia& media, const PipelineConfig& cfg) {
    switch (sample.task) {
        case Task::A:
        case Task::B:
            if (!media.foa) throw Error(ErrorKind::Input, sample.id + ": missing audio");
            return format_doa_answer(predict_doa(*media.foa, pipeline_band(sample, cfg), cfg));
        case Task::C: {
            if (!media.visual) throw Error(ErrorKind::Input, sample.id + ": missing depth and mask");
            std::vector<Box3D> boxes;
            for (auto& [id, box] : ground_all(sample, *media.visual, cfg)) boxes.push_back(box);
            return boxes.empty() ? std::string() : format_bboxes(boxes);
        }
        case Task::D:
        case Task::E: {
            if (!media.foa || !media.visual) throw Error(ErrorKind::Input, sample.id + ": missing media");
            const auto boxes = ground_all(sample, *media.visual, cfg);
            if (boxes.size() < 2 || boxes.size() > 3) return {};
            const DoA doa = predict_doa(*media.foa, pipeline_band(sample, cfg), cfg);
            return match_speaker(doa, label_boxes(boxes, media.visual->depth.intrinsics));
        }
    }
    return {};
}

json to_json(const CrossEvalMatrix& m) {
    const char* methods[] = {"classical", "neural"};
    const char* regimes[] = {"single", "overlap"};
    json cells = json::object();
    for (int a = 0; a < 2; ++a) {
        for (int t = 0; t < 2; ++t) {
            for (int e = 0; e < 2; ++e) {
                cells[methods[a]]["train_" + std::string(regimes[t])]["test_" + std::string(regimes[e])] =
                    m.median[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            }
        }
    }
    return {{"median_angular_error_deg", cells},
            {"test_counts", {{"single", m.test_counts[0]}, {"overlap", m.test_counts[1]}}}};
}

std::string to_text(const CrossEvalMatrix& m) {
    const char* methods[] = {"classical IV", "neural IV"};
    const char* regimes[] = {"single", "overlap"};
    std::string out = "Median angular error (deg)\n";
    out += pad("method", 14) + pad("train", 10) + pad("test single", 14, true) + pad("test overlap", 14, true) + "\n";
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t t = 0; t < 2; ++t) {
            out += pad(methods[a], 14) + pad(regimes[t], 10) + pad(fixed(m.median[a][t][0], 2), 14, true) +
                   pad(fixed(m.median[a][t][1], 2), 14, true) + "\n";
        }
    }
    out += "test cases: single " + std::to_string(m.test_counts[0]) + ", overlap " + std::to_string(m.test_counts[1]) +
           "\n";
    return out;
}

CrossEvalMatrix cross_eval(const std::array<const NivModel*, 2>& models,
                           const std::array<std::vector<DoaCase>, 2>& test_sets, int threads) {
    for (int r = 0; r < 2; ++r) {
        if (!models[static_cast<std::size_t>(r)]) {
            throw Error(ErrorKind::Config, std::string("missing neural model for the ") +
                                               (r == kSingle ? "single" : "overlap") + "-source regime");
        }
        if (test_sets[static_cast<std::size_t>(r)].empty()) throw Error(ErrorKind::Config, "empty cross-eval test set");
    }
    CrossEvalMatrix m;
    for (std::size_t test = 0; test < 2; ++test) {
        const auto& cases = test_sets[test];
        m.test_counts[test] = cases.size();
        // errors[method * 2 + train][case]
        std::array<std::vector<double>, 4> errors;
        for (auto& e : errors) e.resize(cases.size());
        parallel_for(cases.size(), threads, [&](std::size_t i) {
            const auto& c = cases[i];
            errors[0][i] = angular_error(estimate_doa_classical(c.foa), c.truth);
            errors[1][i] = angular_error(estimate_doa_classical(c.foa, c.target_band), c.truth);
            for (std::size_t train = 0; train < 2; ++train) {
                PipelineConfig cfg;
                cfg.method = DoaMethod::Neural;
                cfg.model = models[train];
                errors[2 + train][i] = angular_error(predict_doa(c.foa, c.target_band, cfg), c.truth);
            }
        });
        for (std::size_t k = 0; k < 4; ++k) m.median[k / 2][k % 2][test] = lower_median(errors[k]);
    }
    return m;
}

AblationReport ablation_report(const std::vector<std::pair<std::string, EvalReport>>& variants) {
    if (variants.size() < 2) throw Error(ErrorKind::Config, "an ablation needs at least two variants");
    AblationReport r;
    r.split = variants.front().second.split;
    for (const auto& [name, report] : variants) {
        if (report.split != r.split || report.task != variants.front().second.task ||
            report.samples != variants.front().second.samples) {
            throw Error(ErrorKind::Config, "variant '" + name + "' was evaluated on a different split");
        }
        r.rows.emplace_back(name, report);
    }
    return r;
}

json to_json(const AblationReport& r) {
    json rows = json::array();
    for (const auto& [name, report] : r.rows) rows.push_back({{"variant", name}, {"report", to_json(report)}});
    return {{"split", r.split}, {"variants", rows}};
}

std::string to_text(const AblationReport& r) {
    const std::vector<std::pair<const char*, std::optional<double> EvalReport::*>> cols{
        {"doa_med", &EvalReport::doa_median_deg}, {"doa_mean", &EvalReport::doa_mean_deg},
        {"iou_mean", &EvalReport::iou_mean},      {"iou_med", &EvalReport::iou_median},
        {"off_mean", &EvalReport::offset_mean_m}, {"off_med", &EvalReport::offset_median_m},
        {"acc", &EvalReport::accuracy},           {"chance", &EvalReport::chance_rate}};
    std::vector<std::size_t> shown;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (const auto& row : r.rows) {
            if (row.second.*(cols[c].second)) {
                shown.push_back(c);
                break;
            }
        }
    }
    std::string out = pad("variant", 22) + pad("n", 7, true);
    for (auto c : shown) out += pad(cols[c].first, 10, true);
    out += "\n";
    for (const auto& [name, report] : r.rows) {
        out += pad(name, 22) + pad(std::to_string(report.samples), 7, true);
        for (auto c : shown) {
            const auto& v = report.*(cols[c].second);
            out += pad(v ? fixed(*v, 3) : "-", 10, true);
        }
        out += "\n";
    }
    return out;
}

}  // namespace foaground
