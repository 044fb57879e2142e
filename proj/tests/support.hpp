#pragma once

#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "foaground/error.hpp"
#include "foaground/foa_core.hpp"
#include "foaground/spatial_frame.hpp"

namespace foaground::test {

// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

    DoA doa(double max_el = 90.0) { return {uniform(-180.0, 180.0), uniform(-max_el, max_el)}; }

    Vec3 vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

    Box3D box(double span = 2.0, double min_ext = 0.1, double max_ext = 1.5) {
        return {"speaker", vec(-span, span), vec(min_ext, max_ext)};
    }

    std::vector<double> noise(std::size_t n) {
        std::vector<double> x(n);
        for (auto& v : x) v = normal();
        return x;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// Plane wave: every channel is the dry signal times its encoding gain.
inline FoaSignal plane_wave(const std::vector<double>& dry, const DoA& doa, double gain = 1.0) {
    const auto g = encode_gains(doa);
    FoaSignal foa;
    for (int c = 0; c < 4; ++c) {
        auto& ch = foa.channels[static_cast<std::size_t>(c)];
        ch.resize(dry.size());
        for (std::size_t i = 0; i < dry.size(); ++i) ch[i] = gain * g[static_cast<std::size_t>(c)] * dry[i];
    }
    return foa;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("foaground-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

#define EXPECT_ERROR_KIND(stmt, expected_kind)                                          \
    do {                                                                                \
        try {                                                                           \
            stmt;                                                                       \
            ADD_FAILURE() << "expected " << ::foaground::to_string(expected_kind);      \
        } catch (const ::foaground::Error& e_) {                                        \
            EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                           \
        }                                                                               \
    } while (0)

}  // namespace foaground::test
