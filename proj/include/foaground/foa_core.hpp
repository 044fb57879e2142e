#pragma once

// First-order ambisonics in the repo's canonical B-format: channel order
// W, X, Y, Z with W gain 1 and dipoles pointing forward, left and up.

#include <array>
#include <complex>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "foaground/spatial_frame.hpp"

namespace foaground {

enum FoaChannel : int { kW = 0, kX = 1, kY = 2, kZ = 3 };

struct FoaSignal {
    std::array<std::vector<double>, 4> channels;
    double sample_rate = 16000.0;

    [[nodiscard]] std::size_t length() const { return channels[0].size(); }
    friend bool operator==(const FoaSignal&, const FoaSignal&) = default;
};

void validate(const FoaSignal& signal);

enum class WindowKind { Hann, Rectangular };

struct StftConfig {
    int window_length = 400;  // 25 ms at 16 kHz
    int hop = 160;            // 10 ms
    int fft_size = 512;
    WindowKind window = WindowKind::Hann;
    double sample_rate = 16000.0;

    [[nodiscard]] int bins() const { return fft_size / 2 + 1; }
    [[nodiscard]] double bin_hz(int k) const { return k * sample_rate / fft_size; }
};

void validate(const StftConfig& cfg);

// frames x bins complex raster for one channel.
struct Spectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<std::complex<double>> values;
    StftConfig config;

    std::complex<double>& at(int frame, int bin) { return values[idx(frame, bin)]; }
    [[nodiscard]] const std::complex<double>& at(int frame, int bin) const { return values[idx(frame, bin)]; }

private:
    [[nodiscard]] std::size_t idx(int frame, int bin) const {
        return static_cast<std::size_t>(frame) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(bin);
    }
};

// Per-bin intensity vectors in dipole axis order (X forward, Y left, Z up),
// each unit length or exactly zero, plus the W-channel bin energy.
struct IvFeature {
    int frames = 0;
    int bins = 0;
    std::vector<Vec3> vectors;
    std::vector<double> energy;
    StftConfig config;

    [[nodiscard]] std::size_t idx(int frame, int bin) const {
        return static_cast<std::size_t>(frame) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(bin);
    }
};

using BinMask = std::vector<bool>;

inline constexpr double kIvSilenceEpsilon = 1e-12;

// (1, cos el cos az, cos el sin az, sin el).
std::array<double, 4> encode_gains(const DoA& doa);

// Same gains from a camera-frame unit vector; avoids the pole convention.
std::array<double, 4> encode_gains(const Vec3& camera_direction);

// Dipole-axis vector (forward, left, up) to the camera frame.
constexpr Vec3 iv_axes_to_camera(const Vec3& iv) { return {-iv.y, iv.z, -iv.x}; }

int stft_frame_count(std::size_t signal_length, const StftConfig& cfg);
std::vector<double> analysis_window(const StftConfig& cfg);

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg = {});

IvFeature classical_iv(const FoaSignal& foa, const StftConfig& cfg = {});

// Energy-weighted mean direction over the bins selected by mask (all bins
// when mask is empty).
DoA doa_from_iv(const IvFeature& iv, const std::optional<BinMask>& mask = std::nullopt);

// True for bins whose center frequency k*fs/N lies in [f_lo, f_hi].
BinMask band_mask(const StftConfig& cfg, double f_lo, double f_hi);

// Convenience: classical IV then doa_from_iv, optionally band-masked.
struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
    friend bool operator==(const Band&, const Band&) = default;
};
DoA estimate_doa_classical(const FoaSignal& foa, const std::optional<Band>& band = std::nullopt,
                           const StftConfig& cfg = {});

// 4-channel IEEE-float WAV, channel order W, X, Y, Z.
void write_foa_wav(const std::filesystem::path& path, const FoaSignal& signal);
FoaSignal read_foa_wav(const std::filesystem::path& path);

}  // namespace foaground
