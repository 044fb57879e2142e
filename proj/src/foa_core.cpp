#include "foaground/foa_core.hpp"

#include <cmath>
#include <cstring>

#include "foaground/fft.hpp"
#include "foaground/io_util.hpp"

namespace foaground {

void validate(const FoaSignal& signal) {
    if (!(signal.sample_rate > 0.0)) throw Error(ErrorKind::Config, "sample rate must be positive");
    const auto n = signal.channels[0].size();
    for (const auto& ch : signal.channels) {
        if (ch.size() != n) throw Error(ErrorKind::Shape, "FOA channels differ in length");
    }
}

void validate(const StftConfig& cfg) {
    if (cfg.window_length <= 0 || cfg.hop <= 0 || cfg.fft_size <= 0) {
        throw Error(ErrorKind::Config, "STFT sizes must be positive");
    }
    if (cfg.window_length > cfg.fft_size) throw Error(ErrorKind::Config, "window longer than FFT size");
    if (!(cfg.sample_rate > 0.0)) throw Error(ErrorKind::Config, "sample rate must be positive");
}

std::array<double, 4> encode_gains(const DoA& doa) {
    validate(doa);
    const double az = deg2rad(doa.azimuth_deg);
    const double el = deg2rad(doa.elevation_deg);
    return {1.0, std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

std::array<double, 4> encode_gains(const Vec3& camera_direction) {
    const double n = camera_direction.norm();
    if (!(n > 0.0)) throw Error(ErrorKind::Degenerate, "direction has zero length");
    const Vec3 d = camera_direction * (1.0 / n);
    return {1.0, -d.z, -d.x, d.y};
}

int stft_frame_count(std::size_t signal_length, const StftConfig& cfg) {
    validate(cfg);
    if (signal_length < static_cast<std::size_t>(cfg.window_length)) return 0;
    return 1 + static_cast<int>((signal_length - static_cast<std::size_t>(cfg.window_length)) /
                                static_cast<std::size_t>(cfg.hop));
}

std::vector<double> analysis_window(const StftConfig& cfg) {
    std::vector<double> w(static_cast<std::size_t>(cfg.window_length), 1.0);
    if (cfg.window == WindowKind::Hann) {
        // periodic Hann
        for (int n = 0; n < cfg.window_length; ++n) {
            w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / cfg.window_length);
        }
    }
    return w;
}

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg) {
    validate(cfg);
    if (signal.size() < static_cast<std::size_t>(cfg.window_length)) {
        throw Error(ErrorKind::Length, "signal of " + std::to_string(signal.size()) +
                                           " samples is shorter than one window (" +
                                           std::to_string(cfg.window_length) + ")");
    }
    Spectrogram spec;
    spec.config = cfg;
    spec.frames = stft_frame_count(signal.size(), cfg);
    spec.bins = cfg.bins();
    spec.values.resize(static_cast<std::size_t>(spec.frames) * static_cast<std::size_t>(spec.bins));

    const auto window = analysis_window(cfg);
    std::vector<double> buffer(static_cast<std::size_t>(cfg.fft_size));
    for (int f = 0; f < spec.frames; ++f) {
        std::fill(buffer.begin(), buffer.end(), 0.0);
        const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg.hop);
        for (std::size_t n = 0; n < window.size(); ++n) buffer[n] = signal[start + n] * window[n];
        const auto bins = fft::rfft(buffer);
        std::copy(bins.begin(), bins.end(), spec.values.begin() + static_cast<std::ptrdiff_t>(f) * spec.bins);
    }
    return spec;
}

IvFeature classical_iv(const FoaSignal& foa, const StftConfig& cfg) {
    validate(foa);
    std::array<Spectrogram, 4> specs;
    for (int c = 0; c < 4; ++c) specs[static_cast<std::size_t>(c)] = stft(foa.channels[static_cast<std::size_t>(c)], cfg);

    IvFeature iv;
    iv.config = cfg;
    iv.frames = specs[kW].frames;
    iv.bins = specs[kW].bins;
    const auto total = static_cast<std::size_t>(iv.frames) * static_cast<std::size_t>(iv.bins);
    iv.vectors.resize(total);
    iv.energy.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        const auto w = specs[kW].values[i];
        const auto wc = std::conj(w);
        // real part of conj(F_W) * F_C for each dipole
        const Vec3 intensity{(wc * specs[kX].values[i]).real(), (wc * specs[kY].values[i]).real(),
                             (wc * specs[kZ].values[i]).real()};
        const double n = intensity.norm();
        iv.vectors[i] = n < kIvSilenceEpsilon ? Vec3{} : intensity * (1.0 / n);
        iv.energy[i] = std::norm(w);
    }
    return iv;
}

DoA doa_from_iv(const IvFeature& iv, const std::optional<BinMask>& mask) {
    if (mask && mask->size() != static_cast<std::size_t>(iv.bins)) {
        throw Error(ErrorKind::Shape, "bin mask has " + std::to_string(mask->size()) + " entries, expected " +
                                          std::to_string(iv.bins));
    }
    Vec3 sum;
    bool any = false;
    for (int f = 0; f < iv.frames; ++f) {
        for (int b = 0; b < iv.bins; ++b) {
            if (mask && !(*mask)[static_cast<std::size_t>(b)]) continue;
            const auto i = iv.idx(f, b);
            const double e = iv.energy[i];
            const Vec3& v = iv.vectors[i];
            if (!(e > 0.0) || (v.x == 0.0 && v.y == 0.0 && v.z == 0.0)) continue;
            sum += v * e;
            any = true;
        }
    }
    if (!any || !(sum.norm() > 0.0)) throw Error(ErrorKind::Estimation, "no energetic bins to aggregate");
    return angles_from_dir(iv_axes_to_camera(sum));
}

BinMask band_mask(const StftConfig& cfg, double f_lo, double f_hi) {
    validate(cfg);
    if (!(f_lo >= 0.0) || !(f_lo < f_hi) || f_hi > cfg.sample_rate / 2.0) {
        throw Error(ErrorKind::Range, "band [" + std::to_string(f_lo) + ", " + std::to_string(f_hi) +
                                          "] must satisfy 0 <= lo < hi <= fs/2");
    }
    BinMask mask(static_cast<std::size_t>(cfg.bins()), false);
    for (int k = 0; k < cfg.bins(); ++k) {
        const double f = cfg.bin_hz(k);
        mask[static_cast<std::size_t>(k)] = f >= f_lo && f <= f_hi;
    }
    return mask;
}

DoA estimate_doa_classical(const FoaSignal& foa, const std::optional<Band>& band, const StftConfig& cfg) {
    const auto iv = classical_iv(foa, cfg);
    if (!band) return doa_from_iv(iv);
    return doa_from_iv(iv, band_mask(cfg, band->lo_hz, band->hi_hz));
}

namespace {

constexpr std::uint16_t kWaveFormatFloat = 3;
constexpr std::uint16_t kWaveFormatExtensible = 0xFFFE;

}  // namespace

void write_foa_wav(const std::filesystem::path& path, const FoaSignal& signal) {
    validate(signal);
    const auto frames = static_cast<std::uint32_t>(signal.length());
    const std::uint32_t data_bytes = frames * 4u * 4u;
    const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    io::append_le<std::uint32_t>(out, 36u + data_bytes);
    out += "WAVE";
    out += "fmt ";
    io::append_le<std::uint32_t>(out, 16u);
    io::append_le<std::uint16_t>(out, kWaveFormatFloat);
    io::append_le<std::uint16_t>(out, 4u);
    io::append_le<std::uint32_t>(out, rate);
    io::append_le<std::uint32_t>(out, rate * 16u);
    io::append_le<std::uint16_t>(out, 16u);
    io::append_le<std::uint16_t>(out, 32u);
    out += "data";
    io::append_le<std::uint32_t>(out, data_bytes);
    for (std::uint32_t t = 0; t < frames; ++t) {
        for (const auto& ch : signal.channels) io::append_le<float>(out, static_cast<float>(ch[t]));
    }
    io::write_file(path, out);
}

FoaSignal read_foa_wav(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto fail = [&](const std::string& why) { throw Error(ErrorKind::Format, path.string() + ": " + why); };
    if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
        fail("not a RIFF/WAVE file");
    }

    std::size_t pos = 12;
    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (pos + 8 <= bytes.size()) {
        const auto size = io::read_le<std::uint32_t>(p + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) fail("truncated chunk");
        if (std::memcmp(p + pos, "fmt ", 4) == 0) {
            if (size < 16) fail("short fmt chunk");
            const auto format = io::read_le<std::uint16_t>(p + body);
            channels = io::read_le<std::uint16_t>(p + body + 2);
            rate = io::read_le<std::uint32_t>(p + body + 4);
            bits = io::read_le<std::uint16_t>(p + body + 14);
            bool is_float = format == kWaveFormatFloat;
            if (format == kWaveFormatExtensible && size >= 40) {
                is_float = io::read_le<std::uint16_t>(p + body + 24) == kWaveFormatFloat;
            }
            if (!is_float || bits != 32) fail("expected 32-bit IEEE float samples");
            if (channels != 4) fail("expected 4 channels, found " + std::to_string(channels));
            have_fmt = true;
        } else if (std::memcmp(p + pos, "data", 4) == 0) {
            if (!have_fmt) fail("data chunk before fmt chunk");
            if (size % 16 != 0) fail("data size is not a whole number of frames");
            FoaSignal signal;
            signal.sample_rate = rate;
            const std::size_t frames = size / 16;
            for (auto& ch : signal.channels) ch.resize(frames);
            for (std::size_t t = 0; t < frames; ++t) {
                for (std::size_t c = 0; c < 4; ++c) {
                    signal.channels[c][t] = io::read_le<float>(p + body + (t * 4 + c) * 4);
                }
            }
            return signal;
        }
        pos = body + size + (size & 1u);
    }
    fail("missing data chunk");
    return {};
}

}  // namespace foaground
