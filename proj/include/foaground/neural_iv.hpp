#pragma once

// Neural intensity vector: a learnable replacement for the STFT-based IV.
//
//   f_c   = CNN(x_c)                 c in {W, X, Y, Z}, weights shared
//   h_C   = f_W * f_C                C in {X, Y, Z}, element-wise
//   H'    = [h_X | h_Y | h_Z]
//   v     = Linear(ReLU(Linear(H')))
//   o_t   = head(v_t)                per-frame 3-vector, camera frame
//   dir   = normalize(mean_t o_t)
//
// The CNN is 7 unpadded 1-D convolutions with GELU after each layer. All
// math runs in double precision; parameters are kept float32-representable
// so checkpoints round-trip exactly.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "foaground/foa_core.hpp"

namespace foaground {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NivConfig {
    std::vector<int> kernel_sizes{10, 3, 3, 3, 3, 2, 2};
    std::vector<int> strides{5, 2, 2, 2, 2, 2, 2};
    int channel_width = 64;
    int mlp_hidden = 256;
    int embed_dim = 64;
    std::uint64_t seed = 0;
    // Divide all four channels by the W-channel RMS before the CNN.
    bool normalize_input = true;
    // Trained on clips band-limited to the target source's band; callers
    // must apply the same band_limit before inference.
    bool target_band_input = false;

    friend bool operator==(const NivConfig&, const NivConfig&) = default;
};

void validate(const NivConfig& cfg);

// Output length of the conv stack, 0 when the input is too short.
int niv_frame_count(const NivConfig& cfg, std::size_t input_length);
std::size_t niv_min_input_length(const NivConfig& cfg);

// Eigen-aligned so vectorized kernels see the same alignment on every buffer.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
    std::string name;
    std::vector<int> shape;
    AlignedVec data;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct NivModel {
    NivConfig config;
    std::vector<Tensor> params;  // manifest order, see param_index below
    std::int64_t steps_trained = 0;

    [[nodiscard]] std::size_t parameter_count() const;
};

// Parameter layout: conv{l}.weight [width][k*in] and conv{l}.bias for
// l = 0..6, then mlp1, mlp2 and head weight/bias pairs.
namespace param_index {
constexpr std::size_t conv_weight(std::size_t layer) { return 2 * layer; }
constexpr std::size_t conv_bias(std::size_t layer) { return 2 * layer + 1; }
constexpr std::size_t kMlp1Weight = 14;
constexpr std::size_t kMlp1Bias = 15;
constexpr std::size_t kMlp2Weight = 16;
constexpr std::size_t kMlp2Bias = 17;
constexpr std::size_t kHeadWeight = 18;
constexpr std::size_t kHeadBias = 19;
}  // namespace param_index

// Seeded centered-uniform init with fan-in scaling.
NivModel init_model(const NivConfig& cfg);

Mat cnn_forward(const NivModel& model, std::span<const double> waveform);
Mat interaction(const Mat& f_w, const Mat& f_x, const Mat& f_y, const Mat& f_z);
Mat mlp_project(const NivModel& model, const Mat& h_prime);

// Unit camera-frame direction predicted for the clip.
Vec3 forward_direction(const NivModel& model, const FoaSignal& foa);
DoA forward_doa(const NivModel& model, const FoaSignal& foa);

struct TrainExample {
    FoaSignal foa;
    DoA target;
};

using Gradients = std::vector<AlignedVec>;

struct LossAndGrads {
    double loss = 0.0;
    Gradients grads;
};

// Mean over the batch of 1 - cos(angle(prediction, target)) and its exact
// gradient with respect to every parameter.
LossAndGrads loss_and_grads(const NivModel& model, std::span<const TrainExample> batch, int threads = 1);
double batch_loss(const NivModel& model, std::span<const TrainExample> batch);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int steps = 3000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct TrainResult {
    NivModel model;
    std::vector<double> loss_curve;  // batch loss per step
};

using TrainProgress = std::function<void(int step, double loss)>;

// Adam training with seeded shuffling. Optimizer moments start from zero on
// every call; model.steps_trained keeps counting across calls.
TrainResult train(const NivModel& model, std::span<const TrainExample> dataset, const TrainConfig& cfg,
                  const TrainProgress& progress = {});

// Checkpoint: "NIV1", uint32 LE header length, JSON header (config, tensor
// manifest with shapes, steps), then float32 LE tensors in manifest order.
void save_model(const NivModel& model, const std::filesystem::path& path);
NivModel load_model(const std::filesystem::path& path);

}  // namespace foaground
