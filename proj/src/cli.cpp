#include "foaground/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "foaground/eval_harness.hpp"
#include "foaground/hash.hpp"
#include "foaground/io_util.hpp"
#include "foaground/parallel.hpp"

namespace foaground {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<TrainExample> load_training_examples(const fs::path& split_dir, bool overlap, double crop_s,
                                                 std::size_t max_samples, int threads) {
    const auto all = read_jsonl(split_dir / "samples.jsonl");
    const Task want = overlap ? Task::B : Task::A;
    std::vector<const QaSample*> picked;
    for (const auto& s : all) {
        if (s.task == want && (max_samples == 0 || picked.size() < max_samples)) picked.push_back(&s);
    }
    if (picked.empty()) {
        throw Error(ErrorKind::Input, split_dir.string() + " holds no task " + to_string(want) + " samples");
    }
    std::vector<TrainExample> out(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
        const QaSample& s = *picked[i];
        FoaSignal foa = *load_media(s, split_dir).foa;
        if (overlap) foa = band_limit(foa, *s.ground_truth.target_band);
        if (crop_s > 0.0) {
            const auto keep = static_cast<std::size_t>(std::llround(crop_s * foa.sample_rate));
            for (auto& ch : foa.channels) {
                if (ch.size() > keep) ch.resize(keep);
            }
        }
        out[i] = {std::move(foa), *s.ground_truth.doa};
    });
    return out;
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssert = 1;
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

struct Globals {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    std::string config;
};

void add_globals(CLI::App* sub, Globals& g, bool out_required) {
    sub->add_option("--seed", g.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", g.threads, "Worker threads (default: FOAGROUND_THREADS or all cores)")
        ->capture_default_str();
    auto* out = sub->add_option("--out", g.out, "Output path");
    if (out_required) out->required();
    sub->add_option("--config", g.config,
                    "JSON config file. Top-level keys and the object under the subcommand name map to long "
                    "option names; command-line flags win");
}

json effective_config(const CLI::App* sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_expected_min() == 0) {
                j[name] = true;
            } else if (opt->get_expected_max() <= 1) {
                j[name] = res.back();
            } else {
                j[name] = res;
            }
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

Band parse_band(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Usage, "band must look like LO:HI, got '" + text + "'");
    try {
        std::size_t used = 0;
        const double lo = std::stod(text.substr(0, colon), &used);
        const double hi = std::stod(text.substr(colon + 1));
        if (!(lo >= 0.0 && hi > lo)) throw Error(ErrorKind::Usage, "band needs 0 <= LO < HI");
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::Usage, "band must look like LO:HI, got '" + text + "'");
    }
}

std::string split_identity(const fs::path& split_dir) {
    const fs::path manifest = split_dir.parent_path() / "manifest.json";
    const std::string name = split_dir.filename().string();
    if (fs::exists(manifest)) {
        try {
            return json::parse(io::read_file(manifest)).at("config_hash").get<std::string>().substr(0, 16) + "/" + name;
        } catch (const std::exception&) {
        }
    }
    return name;
}

std::vector<QaSample> load_split(const fs::path& dir) {
    const fs::path file = dir / "samples.jsonl";
    if (!fs::exists(file)) throw Error(ErrorKind::Io, "no samples.jsonl in " + dir.string());
    return read_jsonl(file);
}

std::set<Task> parse_tasks(const std::string& text) {
    std::set<Task> tasks;
    for (char c : text) {
        if (c == ',' || c == ' ') continue;
        tasks.insert(task_from_string(std::string(1, c)));
    }
    return tasks;
}

// Predicts answers for every sample of the selected tasks.
std::vector<Prediction> run_pipeline(const std::vector<QaSample>& samples, const fs::path& dir, const std::set<Task>& tasks,
                                     const PipelineConfig& cfg, int threads) {
    std::vector<const QaSample*> picked;
    for (const auto& s : samples) {
        if (tasks.contains(s.task)) picked.push_back(&s);
    }
    std::vector<Prediction> out(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
        const auto& s = *picked[i];
        out[i] = {s.id, predict_answer(s, load_media(s, dir), cfg)};
    });
    return out;
}

void report_tasks(const std::vector<QaSample>& samples, const std::vector<Prediction>& preds, const std::set<Task>& tasks,
                  const std::string& split, const json& config, const fs::path& out_dir) {
    json reports = json::object();
    std::string text;
    for (Task t : tasks) {
        if (std::none_of(samples.begin(), samples.end(), [&](const QaSample& s) { return s.task == t; })) continue;
        auto r = evaluate_answers(samples, preds, t, split);
        r.config_hash = sha256_hex(config.dump()).substr(0, 16);
        reports[to_string(t)] = to_json(r);
        text += to_text(r);
    }
    std::cout << text;
    if (!out_dir.empty()) {
        write_json(out_dir / "report.json", {{"config", config}, {"reports", reports}});
        io::write_file(out_dir / "report.txt", text);
    }
}

PipelineConfig pipeline_from(const std::string& method, const std::string& model_path, const std::string& band,
                             bool no_question_band, std::optional<NivModel>& model_storage) {
    PipelineConfig cfg;
    if (method == "neural") {
        if (model_path.empty()) throw Error(ErrorKind::Usage, "--method neural needs --model");
        model_storage = load_model(model_path);
        cfg.method = DoaMethod::Neural;
        cfg.model = &*model_storage;
    } else if (method != "classical") {
        throw Error(ErrorKind::Usage, "--method must be classical or neural");
    }
    if (!band.empty()) cfg.band = parse_band(band);
    cfg.use_question_band = !no_question_band;
    return cfg;
}

// ---------------------------------------------------------------- commands

struct GenOpts {
    std::string spec;
    double duration = 0.0;
    int max_order = -1;
    double absorption = 0.0;
    std::string counts;
};

int cmd_gen_dataset(const Globals& g, const GenOpts& o, const CLI::App* sub) {
    DatasetSpec spec = o.spec.empty() ? DatasetSpec::defaults(g.seed)
                                      : dataset_spec_from_json(json::parse(io::read_file(o.spec)));
    if (sub->count("--seed") > 0 || o.spec.empty()) spec.seed = g.seed;
    if (o.duration > 0.0) spec.gen.duration_s = o.duration;
    if (o.max_order >= 0) spec.gen.max_order = o.max_order;
    if (o.absorption > 0.0) spec.gen.absorption = o.absorption;
    if (!o.counts.empty()) {
        // Task totals, split 80/10/10 like the defaults.
        for (auto& s : spec.splits) s.counts.clear();
        std::stringstream ss(o.counts);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--counts entries look like A=320");
            const Task t = task_from_string(item.substr(0, eq));
            const int total = std::stoi(item.substr(eq + 1));
            const int tenth = total / 10;
            for (auto& s : spec.splits) s.counts[t] = s.split == Split::Train ? total - 2 * tenth : tenth;
        }
    }
    validate(spec);
    const fs::path root(g.out);
    ensure_dir(root);
    const json manifest = gen_split(spec, root, g.threads);
    std::cout << "dataset " << root.string() << "\n";
    for (const auto& [name, s] : manifest.at("splits").items()) {
        std::cout << "  " << name << ":";
        for (const auto& [task, n] : s.at("counts").items()) std::cout << " " << task << "=" << n.get<int>();
        std::cout << "\n";
    }
    std::cout << "config_hash " << manifest.at("config_hash").get<std::string>() << "\n";
    std::cout << "manifest_sha256 " << sha256_file(root / "manifest.json") << "\n";
    return kExitOk;
}

struct DoaOpts {
    std::string input;
    std::string method = "classical";
    std::string model;
    std::string band;
    bool no_question_band = false;
};

int cmd_doa(const Globals& g, const DoaOpts& o, const CLI::App* sub) {
    std::optional<NivModel> model;
    const auto cfg = pipeline_from(o.method, o.model, o.band, o.no_question_band, model);
    const fs::path input(o.input);
    const json config = effective_config(sub);
    if (fs::is_regular_file(input)) {
        const FoaSignal foa = read_foa_wav(input);
        const std::string answer = format_doa_answer(predict_doa(foa, cfg.band, cfg));
        std::cout << answer << "\n";
        if (!g.out.empty()) write_predictions({{input.stem().string(), answer}}, g.out);
        return kExitOk;
    }
    const auto samples = load_split(input);
    const std::set<Task> tasks{Task::A, Task::B};
    const auto preds = run_pipeline(samples, input, tasks, cfg, g.threads);
    fs::path out_dir;
    if (!g.out.empty()) {
        out_dir = g.out;
        ensure_dir(out_dir);
        write_predictions(preds, out_dir / "predictions.jsonl");
    }
    report_tasks(samples, preds, tasks, split_identity(input), config, out_dir);
    return kExitOk;
}

struct PredictOpts {
    std::string data;
    std::string method = "classical";
    std::string model;
    std::string band;
    bool no_question_band = false;
    std::string tasks = "ABCDE";
};

int cmd_predict(const Globals& g, const PredictOpts& o, const CLI::App* sub) {
    std::optional<NivModel> model;
    const auto cfg = pipeline_from(o.method, o.model, o.band, o.no_question_band, model);
    const fs::path dir(o.data);
    const auto samples = load_split(dir);
    const auto tasks = parse_tasks(o.tasks);
    const auto preds = run_pipeline(samples, dir, tasks, cfg, g.threads);
    const fs::path out_dir(g.out);
    ensure_dir(out_dir);
    write_predictions(preds, out_dir / "predictions.jsonl");
    report_tasks(samples, preds, tasks, split_identity(dir), effective_config(sub), out_dir);
    return kExitOk;
}

struct TrainOpts {
    std::string data;
    std::string regime = "single";
    int steps = 3000;
    int batch = 16;
    double lr = 1e-3;
    int width = 64;
    double crop = 0.25;
    std::size_t max_samples = 0;
    std::string resume;
};

int cmd_train_niv(const Globals& g, const TrainOpts& o, const CLI::App* sub) {
    if (o.regime != "single" && o.regime != "overlap") throw Error(ErrorKind::Usage, "--regime must be single or overlap");
    const bool overlap = o.regime == "overlap";
    NivModel model;
    if (!o.resume.empty()) {
        model = load_model(o.resume);
        if (model.config.target_band_input != overlap) {
            throw Error(ErrorKind::Usage, "checkpoint " + o.resume + " was trained on the other regime");
        }
    } else {
        NivConfig nc;
        nc.channel_width = o.width;
        nc.seed = g.seed;
        nc.target_band_input = overlap;
        model = init_model(nc);
    }
    const auto examples = load_training_examples(o.data, overlap, o.crop, o.max_samples, g.threads);
    TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch;
    tc.steps = o.steps;
    tc.seed = g.seed;
    tc.threads = g.threads;
    if (o.lr == 0.0) std::cerr << "warning: --lr 0 leaves the weights unchanged\n";
    std::cerr << "training on " << examples.size() << " clips, " << model.parameter_count() << " parameters\n";
    const auto start = std::chrono::steady_clock::now();
    const auto result = train(model, examples, tc, [&](int step, double loss) {
        if (step % 100 == 0 || step == tc.steps) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::fprintf(stderr, "step %d loss %.6f (%.0f s)\n", step, loss, s);
        }
    });
    const fs::path out(g.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    save_model(result.model, out);
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof(line), "%lld,%.17g\n",
                      static_cast<long long>(model.steps_trained) + static_cast<long long>(i) + 1, result.loss_curve[i]);
        csv += line;
    }
    io::write_file(io::with_suffix(out, ".loss.csv"), csv);
    write_json(io::with_suffix(out, ".config.json"), effective_config(sub));
    if (!result.loss_curve.empty()) {
        std::printf("initial loss %.6f final loss %.6f steps_trained %lld\n", result.loss_curve.front(),
                    result.loss_curve.back(), static_cast<long long>(result.model.steps_trained));
    }
    std::cout << "checkpoint " << out.string() << " sha256 " << sha256_file(out) << "\n";
    return kExitOk;
}

struct EvalOpts {
    std::string data;
    std::vector<std::string> predictions;
    std::vector<std::string> names;
    std::string task;
    std::vector<std::string> asserts;
};

struct Assertion {
    std::string metric;
    std::string op;
    double value = 0.0;
    std::string text;
};

Assertion parse_assertion(const std::string& text) {
    static const std::regex re(R"(^\s*([a-z_]+)\s*(<=|>=|==|<|>)\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) {
        throw Error(ErrorKind::Usage, "assertion '" + text + "' does not look like metric<=value");
    }
    return {m[1].str(), m[2].str(), std::stod(m[3].str()), text};
}

std::optional<double> metric_value(const json& report, const std::string& metric) {
    for (const std::string& key : {metric, metric + "_deg", metric + "_m"}) {
        if (report.contains(key) && report.at(key).is_number()) return report.at(key).get<double>();
    }
    return std::nullopt;
}

int cmd_eval(const Globals& g, const EvalOpts& o, const CLI::App* sub) {
    const fs::path dir(o.data);
    const auto samples = load_split(dir);
    const std::string split = split_identity(dir);
    std::vector<Assertion> asserts;
    for (const auto& a : o.asserts) asserts.push_back(parse_assertion(a));

    std::vector<std::pair<std::string, std::vector<Prediction>>> variants;
    for (std::size_t i = 0; i < o.predictions.size(); ++i) {
        const std::string name = i < o.names.size() ? o.names[i] : fs::path(o.predictions[i]).stem().string();
        variants.emplace_back(name, read_predictions(o.predictions[i]));
    }
    std::set<Task> tasks;
    if (!o.task.empty()) {
        tasks = parse_tasks(o.task);
    } else {
        std::set<std::string> ids;
        for (const auto& p : variants.front().second) ids.insert(p.sample_id);
        for (const auto& s : samples) {
            if (ids.contains(s.id)) tasks.insert(s.task);
        }
        if (tasks.empty()) throw Error(ErrorKind::Alignment, "no prediction matches a sample id of " + dir.string());
    }

    const json config = effective_config(sub);
    json out_json{{"config", config}, {"split", split}, {"tasks", json::object()}};
    std::string text;
    std::vector<json> first_reports;
    for (Task t : tasks) {
        std::vector<std::pair<std::string, EvalReport>> reports;
        for (const auto& [name, preds] : variants) {
            auto r = evaluate_answers(samples, preds, t, split);
            r.config_hash = sha256_hex(config.dump()).substr(0, 16);
            reports.emplace_back(name, r);
        }
        first_reports.push_back(to_json(reports.front().second));
        if (reports.size() == 1) {
            out_json["tasks"][to_string(t)] = to_json(reports.front().second);
            text += to_text(reports.front().second);
        } else {
            const auto ab = ablation_report(reports);
            out_json["tasks"][to_string(t)] = to_json(ab);
            text += "task " + to_string(t) + "  split " + split + "\n" + to_text(ab);
        }
    }
    std::cout << text;
    if (!g.out.empty()) {
        const fs::path out_dir(g.out);
        ensure_dir(out_dir);
        write_json(out_dir / "report.json", out_json);
        io::write_file(out_dir / "report.txt", text);
    }

    bool failed = false;
    for (const auto& a : asserts) {
        bool found = false;
        for (const auto& r : first_reports) {
            const auto v = metric_value(r, a.metric);
            if (!v) continue;
            found = true;
            const bool ok = (a.op == "<=" && *v <= a.value) || (a.op == ">=" && *v >= a.value) ||
                            (a.op == "<" && *v < a.value) || (a.op == ">" && *v > a.value) ||
                            (a.op == "==" && *v == a.value);
            std::cout << (ok ? "assert ok: " : "ASSERT FAILED: ") << a.text << " (task "
                      << r.at("task").get<std::string>() << ", value " << *v << ")\n";
            failed = failed || !ok;
        }
        if (!found) throw Error(ErrorKind::Usage, "metric '" + a.metric + "' does not appear in any report");
    }
    return failed ? kExitAssert : kExitOk;
}

struct CrossOpts {
    std::string single_model;
    std::string overlap_model;
    std::string single_data;
    std::string overlap_data;
    std::size_t max_cases = 0;
};

std::vector<DoaCase> doa_cases(const fs::path& dir, Task task, std::size_t max_cases, int threads) {
    std::vector<const QaSample*> picked;
    const auto samples = load_split(dir);
    for (const auto& s : samples) {
        if (s.task == task && (max_cases == 0 || picked.size() < max_cases)) picked.push_back(&s);
    }
    if (picked.empty()) throw Error(ErrorKind::Input, dir.string() + " holds no task " + to_string(task) + " samples");
    std::vector<DoaCase> cases(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
        const auto& s = *picked[i];
        const auto scene = scene_from_json(s.scene.at("audio"));
        const Band band = s.ground_truth.target_band ? *s.ground_truth.target_band : scene.sources.at(0).band;
        cases[i] = {*load_media(s, dir).foa, *s.ground_truth.doa, band};
    });
    return cases;
}

int cmd_cross_eval(const Globals& g, const CrossOpts& o, const CLI::App* sub) {
    for (const auto& [flag, value] : {std::pair{"--single-model", &o.single_model}, {"--overlap-model", &o.overlap_model},
                                      {"--single-data", &o.single_data}, {"--overlap-data", &o.overlap_data}}) {
        if (value->empty()) throw Error(ErrorKind::Usage, std::string("cross-eval needs ") + flag);
    }
    const NivModel single = load_model(o.single_model);
    const NivModel overlap = load_model(o.overlap_model);
    const std::array<std::vector<DoaCase>, 2> tests{doa_cases(o.single_data, Task::A, o.max_cases, g.threads),
                                                    doa_cases(o.overlap_data, Task::B, o.max_cases, g.threads)};
    const auto m = cross_eval({&single, &overlap}, tests, g.threads);
    std::cout << to_text(m);
    if (!g.out.empty()) {
        const fs::path out_dir(g.out);
        ensure_dir(out_dir);
        json j = to_json(m);
        j["config"] = effective_config(sub);
        write_json(out_dir / "cross_eval.json", j);
        io::write_file(out_dir / "cross_eval.txt", to_text(m));
    }
    return kExitOk;
}

struct SimOpts {
    std::string scene;
};

int cmd_simulate(const Globals& g, const SimOpts& o, const CLI::App*) {
    const json j = json::parse(io::read_file(o.scene));
    const fs::path out_dir(g.out);
    ensure_dir(out_dir);
    json summary = json::object();
    const bool record = j.contains("audio") || j.contains("visual");
    if (!record || j.contains("audio")) {
        const auto scene = scene_from_json(record ? j.at("audio") : j);
        const FoaSignal foa = render_scene(scene);
        write_foa_wav(out_dir / "foa.wav", foa);
        summary["sources"] = json::array();
        for (std::size_t i = 0; i < scene.sources.size(); ++i) {
            const DoA truth = receiver_doa(scene.pose.source_positions[i], scene.pose.receiver_position,
                                           scene.pose.receiver_yaw_deg);
            const DoA est = estimate_doa_classical(foa, scene.sources[i].band);
            std::cout << "source " << i << " (" << to_string(scene.sources[i].kind) << ")  true "
                      << format_doa_answer(truth) << "  classical " << format_doa_answer(est) << "\n";
            summary["sources"].push_back({{"kind", to_string(scene.sources[i].kind)},
                                          {"true", {truth.azimuth_deg, truth.elevation_deg}},
                                          {"classical", {est.azimuth_deg, est.elevation_deg}}});
        }
        summary["samples"] = foa.length();
    }
    if (record && j.contains("visual")) {
        const auto vs = visual_scene_from_json(j.at("visual"));
        const auto render = render_depth(vs, g.threads);
        write_depth_frame(out_dir / "depth", render.depth);
        write_instance_mask(out_dir / "mask", render.mask);
        summary["visible_pixels"] = json::object();
        for (const auto& s : vs.loudspeakers) {
            const auto n = visible_pixels(render.mask, s.id);
            summary["visible_pixels"][std::to_string(s.id)] = n;
            std::cout << "loudspeaker " << s.id << ": " << n << " visible pixels\n";
        }
    }
    write_json(out_dir / "summary.json", summary);
    return kExitOk;
}

// Turns a JSON config into option arguments for one subcommand.
std::vector<std::string> config_args(const json& cfg, const CLI::App* sub) {
    std::vector<std::string> args;
    const auto emit = [&](const std::string& key, const json& value) {
        const std::string flag = "--" + key;
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (!opt || key == "config") return false;
        const auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (opt->get_expected_min() == 0) {
            if (value.is_boolean() && value.get<bool>()) args.push_back(flag);
        } else if (value.is_array()) {
            for (const auto& v : value) args.push_back(flag + "=" + as_text(v));
        } else {
            args.push_back(flag + "=" + as_text(value));
        }
        return true;
    };
    if (!cfg.is_object()) throw Error(ErrorKind::Usage, "config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        if (!value.is_object()) emit(key, value);
    }
    if (cfg.contains(sub->get_name())) {
        for (const auto& [key, value] : cfg.at(sub->get_name()).items()) {
            if (!emit(key, value)) throw Error(ErrorKind::Usage, "config key '" + key + "' is not an option of " + sub->get_name());
        }
    }
    return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& input) {
    CLI::App app{"Spatial audio-visual toolkit: FOA simulation, DoA estimation, dataset generation and evaluation",
                 "foaground"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.footer("Environment: FOAGROUND_THREADS sets the default --threads.");

    Globals g;
    g.threads = default_threads();

    GenOpts gen;
    auto* s_gen = app.add_subcommand("gen-dataset", "Generate a task dataset with manifest");
    add_globals(s_gen, g, true);
    s_gen->add_option("--spec", gen.spec, "Dataset spec JSON {seed, gen, splits}; defaults: A320 B300 C600 D140 E290");
    s_gen->add_option("--duration", gen.duration, "Clip length in seconds (default 0.5)");
    s_gen->add_option("--max-order", gen.max_order, "Image-source reflection order (default 3)");
    s_gen->add_option("--absorption", gen.absorption, "Wall absorption (default 0.7)");
    s_gen->add_option("--counts", gen.counts, "Task totals like A=320,B=300; split 80/10/10");
    s_gen->footer(
        "Layout: <out>/<split>/samples.jsonl, audio/*.wav (4-ch float32 W,X,Y,Z), depth/*.bin+.json (float32 LE "
        "meters), mask/*.bin+.json (uint16 LE ids), and <out>/manifest.json with counts, seeds, config hash and "
        "per-file SHA-256.");

    DoaOpts doa;
    auto* s_doa = app.add_subcommand("doa", "Estimate directions for a WAV file or the A/B samples of a split");
    add_globals(s_doa, g, false);
    s_doa->add_option("--input", doa.input, "FOA WAV file or split directory")->required();
    s_doa->add_option("--method", doa.method, "classical or neural")->capture_default_str();
    s_doa->add_option("--model", doa.model, "Neural IV checkpoint (required for --method neural)");
    s_doa->add_option("--band", doa.band, "Fixed band mask LO:HI in Hz, e.g. 2000:6000");
    s_doa->add_flag("--no-question-band", doa.no_question_band, "Do not mask with the band of the kind a question names");
    s_doa->footer("Split input writes <out>/predictions.jsonl ({sample_id, answer_text} per line) and report.json/.txt.");

    PredictOpts pred;
    auto* s_pred = app.add_subcommand("predict", "Run the geometric answer pipeline on a split");
    add_globals(s_pred, g, true);
    s_pred->add_option("--data", pred.data, "Split directory")->required();
    s_pred->add_option("--method", pred.method, "classical or neural")->capture_default_str();
    s_pred->add_option("--model", pred.model, "Neural IV checkpoint");
    s_pred->add_option("--band", pred.band, "Fixed band mask LO:HI in Hz");
    s_pred->add_flag("--no-question-band", pred.no_question_band, "Full-band directions even when a kind is named");
    s_pred->add_option("--tasks", pred.tasks, "Tasks to answer")->capture_default_str();

    TrainOpts tr;
    auto* s_train = app.add_subcommand("train-niv", "Train a Neural IV model on a split");
    add_globals(s_train, g, true);
    s_train->add_option("--data", tr.data, "Split directory")->required();
    s_train->add_option("--regime", tr.regime, "single (task A clips) or overlap (task B, band-limited)")
        ->capture_default_str();
    s_train->add_option("--steps", tr.steps, "Adam steps")->capture_default_str();
    s_train->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
    s_train->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
    s_train->add_option("--width", tr.width, "CNN channel width (new models)")->capture_default_str();
    s_train->add_option("--crop", tr.crop, "Seconds kept from each clip, 0 keeps all")->capture_default_str();
    s_train->add_option("--max-samples", tr.max_samples, "Use at most this many clips, 0 for all")->capture_default_str();
    s_train->add_option("--resume", tr.resume, "Continue from this checkpoint");
    s_train->footer(
        "Writes the checkpoint to --out (NIV1: magic, uint32 LE header length, JSON header, float32 LE tensors), "
        "<out>.loss.csv with step,loss and <out>.config.json.");

    EvalOpts ev;
    auto* s_eval = app.add_subcommand("eval", "Score predictions against a split");
    add_globals(s_eval, g, false);
    s_eval->add_option("--data", ev.data, "Split directory")->required();
    s_eval->add_option("--predictions", ev.predictions, "Predictions JSONL; repeat to compare variants")->required();
    s_eval->add_option("--name", ev.names, "Variant name per predictions file");
    s_eval->add_option("--task", ev.task, "Tasks to score (default: those with predictions)");
    s_eval->add_option("--assert", ev.asserts, "Threshold like doa_median<=10; failing sets exit code 1");
    s_eval->footer("Metrics: doa_median, doa_mean, iou_mean, iou_median, offset_mean, offset_median, accuracy, "
                   "chance_rate. Reports go to <out>/report.json and report.txt.");

    CrossOpts cr;
    auto* s_cross = app.add_subcommand("cross-eval", "Single/overlap train-test matrix for classical and neural IV");
    add_globals(s_cross, g, false);
    s_cross->add_option("--single-model", cr.single_model, "Neural IV trained on single-source clips");
    s_cross->add_option("--overlap-model", cr.overlap_model, "Neural IV trained on overlap clips");
    s_cross->add_option("--single-data", cr.single_data, "Split with task A samples");
    s_cross->add_option("--overlap-data", cr.overlap_data, "Split with task B samples");
    s_cross->add_option("--max-cases", cr.max_cases, "Limit per test set, 0 for all")->capture_default_str();

    SimOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "Render one scene for inspection");
    add_globals(s_sim, g, true);
    s_sim->add_option("--scene", sim.scene, "Scene JSON: an audio scene, or a sample scene with audio/visual keys")
        ->required();
    s_sim->footer("Writes foa.wav, depth.*, mask.* and summary.json into --out.");

    // --config values go first so explicit flags, parsed later, win.
    std::vector<std::string> args(input.begin(), input.end());
    try {
        std::string config_path;
        for (std::size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
        }
        if (!config_path.empty() && args.size() > 1) {
            CLI::App* sub = nullptr;
            for (auto* s : app.get_subcommands({})) {
                if (s->get_name() == args[1]) sub = s;
            }
            if (sub) {
                json cfg;
                try {
                    cfg = json::parse(io::read_file(config_path));
                } catch (const json::exception& e) {
                    throw Error(ErrorKind::Config, "bad config file " + config_path + ": " + e.what());
                }
                const auto extra = config_args(cfg, sub);
                args.insert(args.begin() + 2, extra.begin(), extra.end());
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Usage ? kExitUsage : kExitError;
    }

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (g.threads <= 0) g.threads = 1;

    try {
        if (s_gen->parsed()) return cmd_gen_dataset(g, gen, s_gen);
        if (s_doa->parsed()) return cmd_doa(g, doa, s_doa);
        if (s_pred->parsed()) return cmd_predict(g, pred, s_pred);
        if (s_train->parsed()) return cmd_train_niv(g, tr, s_train);
        if (s_eval->parsed()) return cmd_eval(g, ev, s_eval);
        if (s_cross->parsed()) return cmd_cross_eval(g, cr, s_cross);
        if (s_sim->parsed()) return cmd_simulate(g, sim, s_sim);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Usage ? kExitUsage : kExitError;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace foaground
