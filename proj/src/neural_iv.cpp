#include "foaground/neural_iv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "foaground/io_util.hpp"
#include "foaground/parallel.hpp"

namespace foaground {

namespace {

constexpr int kLayers = 7;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

using CMap = Eigen::Map<const Mat>;
using MapM = Eigen::Map<Mat>;
using StridedRows = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

int in_channels(const NivConfig& cfg, int layer) { return layer == 0 ? 1 : cfg.channel_width; }

CMap weight(const NivModel& m, std::size_t index) {
    const auto& t = m.params[index];
    return CMap(t.data.data(), t.shape[0], t.shape[1]);
}

Eigen::Map<const RowVec> bias(const NivModel& m, std::size_t index) {
    const auto& t = m.params[index];
    return Eigen::Map<const RowVec>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

// Scratch buffers for one channel's forward and backward pass. Reused across
// samples so steady-state training does not allocate.
struct ChannelWork {
    std::array<Mat, kLayers + 1> acts;   // acts[0] is the scaled input
    std::array<Mat, kLayers> gelu_grad;  // GELU'(pre-activation) per layer
    Mat d_act, dz, dcols;
};

struct SampleWork {
    std::array<ChannelWork, 4> channels;
    Mat h_prime, relu_mask, a1, v, o;
    Mat d_o, d_v, d_z1, d_h, d_fw, d_fc;
    Gradients grads;
};

SampleWork& thread_work() {
    thread_local SampleWork work;
    return work;
}

double input_scale(const NivConfig& cfg, const FoaSignal& foa) {
    if (!cfg.normalize_input) return 1.0;
    const auto& w = foa.channels[kW];
    double energy = 0.0;
    for (double v : w) energy += v * v;
    if (!(energy > 0.0)) return 1.0;
    return 1.0 / std::sqrt(energy / static_cast<double>(w.size()));
}

// Fills work.acts; returns the last layer's activations.
const Mat& run_cnn(const NivModel& model, std::span<const double> waveform, double scale, ChannelWork& work,
                   bool keep_grad) {
    const auto& cfg = model.config;
    const auto L = waveform.size();
    if (niv_frame_count(cfg, L) <= 0) {
        throw Error(ErrorKind::Length, "waveform of " + std::to_string(L) + " samples is shorter than the " +
                                           std::to_string(niv_min_input_length(cfg)) + "-sample receptive field");
    }
    Mat& x0 = work.acts[0];
    x0.resize(static_cast<Eigen::Index>(L), 1);
    for (std::size_t t = 0; t < L; ++t) x0(static_cast<Eigen::Index>(t), 0) = waveform[t] * scale;

    for (std::size_t l = 0; l < kLayers; ++l) {
        const int k = cfg.kernel_sizes[l];
        const int s = cfg.strides[l];
        const int cin = in_channels(cfg, static_cast<int>(l));
        const Mat& x = work.acts[l];
        const auto t_out = (x.rows() - k) / s + 1;
        StridedRows cols(x.data(), t_out, static_cast<Eigen::Index>(k) * cin, Eigen::OuterStride<>(s * cin));
        Mat& a = work.acts[l + 1];
        a.resize(t_out, cfg.channel_width);
        a.noalias() = cols * weight(model, param_index::conv_weight(l)).transpose();
        a.rowwise() += bias(model, param_index::conv_bias(l));

        Mat& g = work.gelu_grad[l];
        if (keep_grad) g.resize(a.rows(), a.cols());
        double* pa = a.data();
        double* pg = g.data();
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            const double v = pa[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            pa[i] = v * cdf;
            if (keep_grad) pg[i] = cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        }
    }
    return work.acts[kLayers];
}

// Expects work.d_act to hold dL/d(output); accumulates into grads.
void backward_cnn(const NivModel& model, ChannelWork& work, Gradients& grads) {
    const auto& cfg = model.config;
    for (std::size_t li = kLayers; li-- > 0;) {
        const int k = cfg.kernel_sizes[li];
        const int s = cfg.strides[li];
        const int cin = in_channels(cfg, static_cast<int>(li));
        const Mat& x = work.acts[li];
        work.dz = work.d_act.cwiseProduct(work.gelu_grad[li]);
        const Mat& dz = work.dz;
        const auto t_out = dz.rows();
        const auto width = static_cast<Eigen::Index>(k) * cin;
        StridedRows cols(x.data(), t_out, width, Eigen::OuterStride<>(s * cin));

        auto& gw = grads[param_index::conv_weight(li)];
        auto& gb = grads[param_index::conv_bias(li)];
        MapM(gw.data(), dz.cols(), width).noalias() += dz.transpose() * cols;
        Eigen::Map<RowVec>(gb.data(), dz.cols()) += dz.colwise().sum();

        if (li == 0) break;
        work.dcols.resize(t_out, width);
        work.dcols.noalias() = dz * weight(model, param_index::conv_weight(li));
        work.d_act.setZero(x.rows(), x.cols());
        for (Eigen::Index t = 0; t < t_out; ++t) {
            Eigen::Map<RowVec>(work.d_act.data() + t * s * cin, width) += work.dcols.row(t);
        }
    }
}

void interaction_into(const Mat& f_w, const Mat& f_x, const Mat& f_y, const Mat& f_z, Mat& h) {
    const auto w = f_w.cols();
    h.resize(f_w.rows(), 3 * w);
    h.middleCols(0, w) = f_w.cwiseProduct(f_x);
    h.middleCols(w, w) = f_w.cwiseProduct(f_y);
    h.middleCols(2 * w, w) = f_w.cwiseProduct(f_z);
}

// MLP and per-frame head; leaves activations in work and returns o.
const Mat& run_head(const NivModel& model, SampleWork& work) {
    using namespace param_index;
    const Mat& h = work.h_prime;
    work.a1.resize(h.rows(), model.config.mlp_hidden);
    work.a1.noalias() = h * weight(model, kMlp1Weight).transpose();
    work.a1.rowwise() += bias(model, kMlp1Bias);
    work.relu_mask = (work.a1.array() > 0.0).cast<double>().matrix();
    work.a1 = work.a1.cwiseMax(0.0);
    work.v.resize(h.rows(), model.config.embed_dim);
    work.v.noalias() = work.a1 * weight(model, kMlp2Weight).transpose();
    work.v.rowwise() += bias(model, kMlp2Bias);
    work.o.resize(h.rows(), 3);
    work.o.noalias() = work.v * weight(model, kHeadWeight).transpose();
    work.o.rowwise() += bias(model, kHeadBias);
    return work.o;
}

Vec3 mean_row(const Mat& o) {
    const RowVec m = o.colwise().mean();
    return {m(0), m(1), m(2)};
}

void check_input(const FoaSignal& foa) {
    validate(foa);
    if (foa.length() == 0) throw Error(ErrorKind::Length, "empty FOA signal");
}

// Unnormalized mean head output for one clip.
Vec3 forward_mean(const NivModel& model, const FoaSignal& foa, SampleWork& work, bool keep_grad) {
    check_input(foa);
    const double scale = input_scale(model.config, foa);
    for (std::size_t c = 0; c < 4; ++c) run_cnn(model, foa.channels[c], scale, work.channels[c], keep_grad);
    interaction_into(work.channels[0].acts[kLayers], work.channels[1].acts[kLayers], work.channels[2].acts[kLayers],
                     work.channels[3].acts[kLayers], work.h_prime);
    return mean_row(run_head(model, work));
}

void zero_grads(const NivModel& model, Gradients& g) {
    g.resize(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) g[i].assign(model.params[i].data.size(), 0.0);
}

// Loss of one example; work.grads receives its gradient scaled by sample_weight.
double sample_loss_and_grads(const NivModel& model, const TrainExample& ex, double sample_weight, SampleWork& work) {
    zero_grads(model, work.grads);
    auto& grads = work.grads;
    const Vec3 m = forward_mean(model, ex.foa, work, true);
    const double mn = m.norm();
    if (!(mn > 0.0) || !std::isfinite(mn)) throw Error(ErrorKind::Numeric, "prediction has zero or non-finite length");
    const Vec3 p = m * (1.0 / mn);
    const Vec3 g = dir_from_angles(ex.target);
    const double cosine = p.dot(g);
    const double loss = 1.0 - cosine;
    if (!std::isfinite(loss)) throw Error(ErrorKind::Numeric, "non-finite loss");

    // d(1 - p.g)/dm = -(g - (p.g) p) / |m|
    const Vec3 dm = (g - p * cosine) * (-sample_weight / mn);
    const auto frames = work.o.rows();
    work.d_o.resize(frames, 3);
    work.d_o.col(0).setConstant(dm.x / static_cast<double>(frames));
    work.d_o.col(1).setConstant(dm.y / static_cast<double>(frames));
    work.d_o.col(2).setConstant(dm.z / static_cast<double>(frames));

    using namespace param_index;
    MapM(grads[kHeadWeight].data(), 3, work.v.cols()).noalias() += work.d_o.transpose() * work.v;
    Eigen::Map<RowVec>(grads[kHeadBias].data(), 3) += work.d_o.colwise().sum();
    work.d_v.resize(frames, work.v.cols());
    work.d_v.noalias() = work.d_o * weight(model, kHeadWeight);

    MapM(grads[kMlp2Weight].data(), work.d_v.cols(), work.a1.cols()).noalias() += work.d_v.transpose() * work.a1;
    Eigen::Map<RowVec>(grads[kMlp2Bias].data(), work.d_v.cols()) += work.d_v.colwise().sum();
    work.d_z1.resize(frames, work.a1.cols());
    work.d_z1.noalias() = work.d_v * weight(model, kMlp2Weight);
    work.d_z1.array() *= work.relu_mask.array();

    MapM(grads[kMlp1Weight].data(), work.d_z1.cols(), work.h_prime.cols()).noalias() +=
        work.d_z1.transpose() * work.h_prime;
    Eigen::Map<RowVec>(grads[kMlp1Bias].data(), work.d_z1.cols()) += work.d_z1.colwise().sum();
    work.d_h.resize(frames, work.h_prime.cols());
    work.d_h.noalias() = work.d_z1 * weight(model, kMlp1Weight);

    const Mat& f_w = work.channels[0].acts[kLayers];
    const auto w = f_w.cols();
    work.d_fw.setZero(f_w.rows(), w);
    for (std::size_t c = 1; c < 4; ++c) {
        auto& ch = work.channels[c];
        const auto block = work.d_h.middleCols(static_cast<Eigen::Index>(c - 1) * w, w);
        work.d_fw += block.cwiseProduct(ch.acts[kLayers]);
        ch.d_act = block.cwiseProduct(f_w);
        backward_cnn(model, ch, grads);
    }
    work.channels[0].d_act = work.d_fw;
    backward_cnn(model, work.channels[0], grads);
    return loss;
}

void add_into(Gradients& dst, const Gradients& src) {
    for (std::size_t t = 0; t < dst.size(); ++t) {
        auto& d = dst[t];
        const auto& s = src[t];
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
    }
}

}  // namespace

void validate(const NivConfig& cfg) {
    if (cfg.kernel_sizes.size() != kLayers || cfg.strides.size() != kLayers) {
        throw Error(ErrorKind::Config, "the CNN front end has exactly 7 layers");
    }
    for (int l = 0; l < kLayers; ++l) {
        if (cfg.kernel_sizes[static_cast<std::size_t>(l)] <= 0 || cfg.strides[static_cast<std::size_t>(l)] <= 0) {
            throw Error(ErrorKind::Config, "kernel sizes and strides must be positive");
        }
    }
    if (cfg.channel_width <= 0 || cfg.mlp_hidden <= 0 || cfg.embed_dim <= 0) {
        throw Error(ErrorKind::Config, "layer widths must be positive");
    }
}

int niv_frame_count(const NivConfig& cfg, std::size_t input_length) {
    long long len = static_cast<long long>(input_length);
    for (int l = 0; l < kLayers; ++l) {
        const int k = cfg.kernel_sizes[static_cast<std::size_t>(l)];
        const int s = cfg.strides[static_cast<std::size_t>(l)];
        if (len < k) return 0;
        len = (len - k) / s + 1;
    }
    return static_cast<int>(len);
}

std::size_t niv_min_input_length(const NivConfig& cfg) {
    // Smallest input producing one output frame: walk the stack backwards.
    std::size_t len = 1;
    for (int l = kLayers - 1; l >= 0; --l) {
        len = (len - 1) * static_cast<std::size_t>(cfg.strides[static_cast<std::size_t>(l)]) +
              static_cast<std::size_t>(cfg.kernel_sizes[static_cast<std::size_t>(l)]);
    }
    return len;
}

std::size_t NivModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params) n += t.data.size();
    return n;
}

NivModel init_model(const NivConfig& cfg) {
    validate(cfg);
    NivModel model;
    model.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    const auto add = [&](const std::string& name, int rows, int cols, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor t{name, cols > 0 ? std::vector<int>{rows, cols} : std::vector<int>{rows}, {}};
        t.data.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(std::max(cols, 1)));
        for (double& v : t.data) v = round_to_float(dist(rng));
        model.params.push_back(std::move(t));
    };
    for (int l = 0; l < kLayers; ++l) {
        const int fan_in = cfg.kernel_sizes[static_cast<std::size_t>(l)] * in_channels(cfg, l);
        add("conv" + std::to_string(l) + ".weight", cfg.channel_width, fan_in, fan_in);
        add("conv" + std::to_string(l) + ".bias", cfg.channel_width, 0, fan_in);
    }
    add("mlp1.weight", cfg.mlp_hidden, 3 * cfg.channel_width, 3 * cfg.channel_width);
    add("mlp1.bias", cfg.mlp_hidden, 0, 3 * cfg.channel_width);
    add("mlp2.weight", cfg.embed_dim, cfg.mlp_hidden, cfg.mlp_hidden);
    add("mlp2.bias", cfg.embed_dim, 0, cfg.mlp_hidden);
    add("head.weight", 3, cfg.embed_dim, cfg.embed_dim);
    add("head.bias", 3, 0, cfg.embed_dim);
    return model;
}

Mat cnn_forward(const NivModel& model, std::span<const double> waveform) {
    ChannelWork work;
    return run_cnn(model, waveform, 1.0, work, false);
}

Mat interaction(const Mat& f_w, const Mat& f_x, const Mat& f_y, const Mat& f_z) {
    for (const Mat* m : {&f_x, &f_y, &f_z}) {
        if (m->rows() != f_w.rows() || m->cols() != f_w.cols()) {
            throw Error(ErrorKind::Shape, "latent feature maps differ in shape");
        }
    }
    Mat h;
    interaction_into(f_w, f_x, f_y, f_z, h);
    return h;
}

Mat mlp_project(const NivModel& model, const Mat& h_prime) {
    if (h_prime.cols() != 3 * model.config.channel_width) {
        throw Error(ErrorKind::Shape, "interaction features have " + std::to_string(h_prime.cols()) +
                                          " columns, expected " + std::to_string(3 * model.config.channel_width));
    }
    Mat z1 = h_prime * weight(model, param_index::kMlp1Weight).transpose();
    z1.rowwise() += bias(model, param_index::kMlp1Bias);
    Mat v = z1.cwiseMax(0.0) * weight(model, param_index::kMlp2Weight).transpose();
    v.rowwise() += bias(model, param_index::kMlp2Bias);
    return v;
}

Vec3 forward_direction(const NivModel& model, const FoaSignal& foa) {
    const Vec3 m = forward_mean(model, foa, thread_work(), false);
    const double n = m.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorKind::Estimation, "network output has zero length");
    return m * (1.0 / n);
}

DoA forward_doa(const NivModel& model, const FoaSignal& foa) { return angles_from_dir(forward_direction(model, foa)); }

LossAndGrads loss_and_grads(const NivModel& model, std::span<const TrainExample> batch, int threads) {
    if (batch.empty()) throw Error(ErrorKind::Input, "empty batch");
    const double w = 1.0 / static_cast<double>(batch.size());
    LossAndGrads out;
    zero_grads(model, out.grads);
    // Per-sample gradients are summed in index order on every path, so the
    // result does not depend on the thread count.
    if (threads <= 1 || batch.size() == 1) {
        auto& work = thread_work();
        for (const auto& ex : batch) {
            out.loss += sample_loss_and_grads(model, ex, w, work) * w;
            add_into(out.grads, work.grads);
        }
    } else {
        std::vector<Gradients> per_sample(batch.size());
        std::vector<double> losses(batch.size());
        parallel_for(batch.size(), threads, [&](std::size_t i) {
            auto& work = thread_work();
            losses[i] = sample_loss_and_grads(model, batch[i], w, work);
            per_sample[i] = work.grads;
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out.loss += losses[i] * w;
            add_into(out.grads, per_sample[i]);
        }
    }
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::Numeric, "non-finite loss");
    return out;
}

double batch_loss(const NivModel& model, std::span<const TrainExample> batch) {
    if (batch.empty()) throw Error(ErrorKind::Input, "empty batch");
    double total = 0.0;
    for (const auto& ex : batch) {
        const Vec3 p = forward_direction(model, ex.foa);
        total += 1.0 - p.dot(dir_from_angles(ex.target));
    }
    return total / static_cast<double>(batch.size());
}

TrainResult train(const NivModel& model, std::span<const TrainExample> dataset, const TrainConfig& cfg,
                  const TrainProgress& progress) {
    if (dataset.empty()) throw Error(ErrorKind::Input, "empty training set");
    if (!(cfg.learning_rate >= 0.0)) throw Error(ErrorKind::Config, "learning rate must be nonnegative");
    if (cfg.batch_size <= 0 || cfg.steps < 0) throw Error(ErrorKind::Config, "batch size and steps must be positive");

    TrainResult result{model, {}};
    NivModel& m = result.model;
    Gradients first_moment;
    Gradients second_moment;
    zero_grads(m, first_moment);
    zero_grads(m, second_moment);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    std::vector<TrainExample> batch;

    double initial = 0.0;
    int diverged_for = 0;
    for (int step = 1; step <= cfg.steps; ++step) {
        batch.clear();
        while (batch.size() < static_cast<std::size_t>(cfg.batch_size)) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(dataset[order[cursor++]]);
        }
        auto lg = loss_and_grads(m, batch, cfg.threads);
        result.loss_curve.push_back(lg.loss);
        if (step == 1) initial = lg.loss;
        diverged_for = lg.loss > 10.0 * initial ? diverged_for + 1 : 0;
        if (diverged_for >= 100) {
            throw Error(ErrorKind::Training, "loss stayed above 10x its initial value for 100 steps (step " +
                                                 std::to_string(step) + ")");
        }

        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        for (std::size_t t = 0; t < m.params.size(); ++t) {
            auto& p = m.params[t].data;
            auto& m1 = first_moment[t];
            auto& m2 = second_moment[t];
            const auto& g = lg.grads[t];
            for (std::size_t j = 0; j < p.size(); ++j) {
                m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g[j];
                m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                const double update = cfg.learning_rate * (m1[j] / bc1) / (std::sqrt(m2[j] / bc2) + cfg.epsilon);
                p[j] = round_to_float(p[j] - update);
            }
        }
        ++m.steps_trained;
        if (progress) progress(step, lg.loss);
    }
    return result;
}

namespace {

constexpr char kMagic[4] = {'N', 'I', 'V', '1'};

nlohmann::json config_json(const NivConfig& c) {
    return {{"kernel_sizes", c.kernel_sizes}, {"strides", c.strides},   {"channel_width", c.channel_width},
            {"mlp_hidden", c.mlp_hidden},     {"embed_dim", c.embed_dim}, {"seed", c.seed},
            {"normalize_input", c.normalize_input}, {"target_band_input", c.target_band_input}};
}

}  // namespace

void save_model(const NivModel& model, const std::filesystem::path& path) {
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& t : model.params) manifest.push_back({{"name", t.name}, {"shape", t.shape}});
    const nlohmann::json header{{"format", "NIV1"},
                                {"config", config_json(model.config)},
                                {"tensors", manifest},
                                {"steps_trained", model.steps_trained}};
    const std::string text = header.dump();

    std::string out(kMagic, sizeof(kMagic));
    io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& t : model.params) {
        for (double v : t.data) io::append_le<float>(out, static_cast<float>(v));
    }
    io::write_file(path, out);
}

NivModel load_model(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto fail = [&](const std::string& why) { throw Error(ErrorKind::Format, path.string() + ": " + why); };
    if (bytes.size() < 8 || std::memcmp(p, kMagic, 4) != 0) fail("missing NIV1 magic");
    const auto header_len = io::read_le<std::uint32_t>(p + 4);
    if (8 + static_cast<std::size_t>(header_len) > bytes.size()) fail("truncated header");

    NivModel model;
    std::vector<std::pair<std::string, std::vector<int>>> manifest;
    try {
        const auto header = nlohmann::json::parse(bytes.substr(8, header_len));
        if (header.at("format").get<std::string>() != "NIV1") fail("unsupported format version");
        const auto& c = header.at("config");
        model.config.kernel_sizes = c.at("kernel_sizes").get<std::vector<int>>();
        model.config.strides = c.at("strides").get<std::vector<int>>();
        model.config.channel_width = c.at("channel_width").get<int>();
        model.config.mlp_hidden = c.at("mlp_hidden").get<int>();
        model.config.embed_dim = c.at("embed_dim").get<int>();
        model.config.seed = c.at("seed").get<std::uint64_t>();
        model.config.normalize_input = c.at("normalize_input").get<bool>();
        model.config.target_band_input = c.value("target_band_input", false);
        model.steps_trained = header.at("steps_trained").get<std::int64_t>();
        for (const auto& t : header.at("tensors")) {
            manifest.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>());
        }
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("bad header: ") + e.what());
    }
    validate(model.config);

    // The manifest must describe exactly the architecture in the config.
    const NivModel reference = init_model(model.config);
    if (manifest.size() != reference.params.size()) fail("tensor manifest does not match the configuration");
    std::size_t pos = 8 + header_len;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& ref = reference.params[i];
        if (manifest[i].first != ref.name || manifest[i].second != ref.shape) {
            fail("tensor " + manifest[i].first + " does not match the configuration");
        }
        Tensor t{ref.name, ref.shape, AlignedVec(ref.data.size())};
        if (pos + t.data.size() * 4 > bytes.size()) fail("truncated tensor data in " + t.name);
        for (double& v : t.data) {
            v = io::read_le<float>(p + pos);
            pos += 4;
        }
        model.params.push_back(std::move(t));
    }
    if (pos != bytes.size()) fail("trailing bytes after the last tensor");
    return model;
}

}  // namespace foaground
