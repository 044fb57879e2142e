#include "foaground/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "foaground/error.hpp"

namespace foaground::fft {

namespace {

struct PlanCache {
    std::mutex mutex;
    std::map<std::size_t, fftw_plan> forward;
    std::map<std::size_t, fftw_plan> inverse;

    ~PlanCache() {
        for (auto& [n, p] : forward) fftw_destroy_plan(p);
        for (auto& [n, p] : inverse) fftw_destroy_plan(p);
    }
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

// Planning scratch; FFTW_ESTIMATE never touches the arrays' contents.
fftw_plan make_plan(std::size_t n, bool forward_dir) {
    auto* r = fftw_alloc_real(n);
    auto* c = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    fftw_plan p = forward_dir ? fftw_plan_dft_r2c_1d(len, r, c, FFTW_ESTIMATE | FFTW_UNALIGNED)
                              : fftw_plan_dft_c2r_1d(len, c, r, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(r);
    fftw_free(c);
    if (p == nullptr) throw Error(ErrorKind::Config, "FFTW could not plan a transform of size " + std::to_string(n));
    return p;
}

fftw_plan plan_for(std::size_t n, bool forward_dir) {
    auto& pc = cache();
    std::lock_guard lock(pc.mutex);
    auto& table = forward_dir ? pc.forward : pc.inverse;
    auto it = table.find(n);
    if (it != table.end()) return it->second;
    fftw_plan p = make_plan(n, forward_dir);
    table.emplace(n, p);
    return p;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> input) {
    const std::size_t n = input.size();
    if (n == 0) return {};
    std::vector<double> in(input.begin(), input.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(plan_for(n, true), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n) {
    if (n == 0) return {};
    if (bins.size() != n / 2 + 1) throw Error(ErrorKind::Shape, "irfft expects n/2+1 bins");
    // c2r destroys its input.
    std::vector<std::complex<double>> in(bins.begin(), bins.end());
    std::vector<double> out(n);
    fftw_execute_dft_c2r(plan_for(n, false), reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
}

}  // namespace foaground::fft
